import json

import pytest

from previz.generation import prompt_tokens
from previz.prompting import (
    ALL_CATEGORIES,
    EMPHASIZED_TIER1,
    TIER1_CATEGORIES,
    TIER2_CATEGORIES,
    MenuCategory,
    MenuSchema,
    PresetError,
    PromptSpec,
    SelectionError,
    UnknownStyle,
    apply_director_style,
    build_schema,
    compose,
    load_presets,
    select,
    serialize_prompt,
    spec_from_dict,
    spec_to_dict,
)
from oracles import w_total_of

REQUIRED_STYLES = {
    "Wes Anderson",
    "Martin Scorsese",
    "Stanley Kubrick",
    "Ridley Scott",
    "Russo Brothers",
}


def test_shipped_library_constants(library):
    assert len(library.backgrounds) >= 100
    assert len(library.director_styles) == 10
    assert REQUIRED_STYLES <= set(library.style_names())
    assert set(library.times) == {"noon", "night", "sunrise_sunset"}
    assert set(library.light_types) == {"soft", "hard", "key"}
    assert set(library.light_directions) == {"left", "right"}
    assert len(library.framings) >= 20
    assert all(s.prompt for s in library.director_styles)


def test_framings_have_slots_and_descriptions(library):
    for framing in library.framings:
        assert framing.id
        assert framing.description
        assert framing.character_slots >= 1


def test_style_lookup(library):
    assert library.style("Wes Anderson").name == "Wes Anderson"
    with pytest.raises(UnknownStyle):
        library.style("Nobody Famous")


def _tampered_presets(tmp_path, mutate):
    from previz.prompting import default_presets_path

    data = json.loads(default_presets_path().read_text(encoding="utf-8"))
    mutate(data)
    path = tmp_path / "presets.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["director_styles"].pop(), "director_styles"),
        (lambda d: d.update(backgrounds=d["backgrounds"][:99]), "backgrounds"),
        (lambda d: d.update(times=["noon", "night"]), "times"),
        (lambda d: d.update(light_types=["soft"]), "light_types"),
        (lambda d: d["weights"].pop("environment"), "weights"),
        (lambda d: d.update(presets_version=9), "presets_version"),
        (
            lambda d: d["director_styles"].__setitem__(
                0, {"name": "Someone Else", "prompt": "x"}
            ),
            "Wes Anderson",
        ),
    ],
)
def test_load_presets_rejects_tampering(tmp_path, mutate, fragment):
    path = _tampered_presets(tmp_path, mutate)
    with pytest.raises(PresetError) as err:
        load_presets(path)
    assert fragment in str(err.value)


def test_load_presets_missing_file(tmp_path):
    with pytest.raises(PresetError):
        load_presets(tmp_path / "nope.json")


def test_schema_structure(schema, library):
    assert [c.name for c in schema.categories] == list(ALL_CATEGORIES)
    for cat in schema.categories:
        assert cat.tier == (1 if cat.name in TIER1_CATEGORIES else 2)
        assert cat.name in TIER1_CATEGORIES or cat.name in TIER2_CATEGORIES
        assert len(cat.options) > 0
    assert schema.category("environment").options == library.backgrounds
    assert schema.category("director_style").options == tuple(library.style_names())


def test_tier_ordering_shipped(schema):
    tier1 = schema.tier_weights(1)
    tier2 = schema.tier_weights(2)
    assert min(tier1) > max(tier2)
    emphasized = [c.weight for c in schema.categories if c.name in EMPHASIZED_TIER1]
    others = [
        c.weight
        for c in schema.categories
        if c.tier == 1 and c.name not in EMPHASIZED_TIER1
    ]
    assert min(emphasized) > max(others)
    facial = schema.category("facial_detail").weight
    assert all(
        facial > c.weight
        for c in schema.categories
        if c.tier == 2 and c.name != "facial_detail"
    )


def test_build_schema_rejects_inverted_weights(tmp_path):
    path = _tampered_presets(tmp_path, lambda d: d["weights"].update(facial_detail=0.5))
    with pytest.raises(PresetError):
        build_schema(load_presets(path))


def test_select_validates_tokens(schema, library):
    spec = select(schema, library, {"environment": "beach", "time_of_day": ["noon"]})
    assert spec.selections == {"environment": ("beach",), "time_of_day": ("noon",)}
    with pytest.raises(SelectionError):
        select(schema, library, {"environment": "atlantis"})
    with pytest.raises(SelectionError):
        select(schema, library, {"no_such_menu": "x"})
    with pytest.raises(SelectionError):
        select(schema, library, {}, {"Ethan": {"hair_color": "plaid"}})


def test_select_attaches_style_text(schema, library):
    spec = select(schema, library, {"director_style": "Stanley Kubrick"})
    assert spec.style_text == library.style("Stanley Kubrick").prompt


def test_apply_director_style_last_write_wins(schema, library):
    spec = select(schema, library, {"director_style": "Wes Anderson"})
    spec = apply_director_style(spec, "Ridley Scott", library)
    assert spec.selections["director_style"] == ("Ridley Scott",)
    assert spec.style_text == library.style("Ridley Scott").prompt
    with pytest.raises(UnknownStyle):
        apply_director_style(spec, "Nobody", library)


def test_compose_hand_computed_total(schema, library):
    # environment 3.0 + time_of_day 3.0 + light_direction 2.0
    # + facial_detail 1.5 + hair_color (override) 1.0 = 10.5
    spec = select(
        schema,
        library,
        {
            "environment": "beach",
            "time_of_day": "noon",
            "light_direction": "left",
            "facial_detail": "tired eyes",
        },
        {"Olivia": {"hair_color": "black"}},
    )
    weighted = compose(spec, schema)
    assert weighted.w_total == pytest.approx(10.5, abs=1e-9)
    tokens = [t.token for t in weighted.terms]
    assert tokens == ["beach", "left", "noon", "tired eyes", "Olivia black"]
    assert all(t.x == 1.0 for t in weighted.terms)


def test_compose_empty_spec_is_zero(schema):
    weighted = compose(PromptSpec(), schema)
    assert weighted.terms == ()
    assert weighted.w_total == 0.0


def test_compose_substitutes_style_text(schema, library):
    spec = select(schema, library, {"director_style": "Wes Anderson"})
    weighted = compose(spec, schema)
    assert weighted.terms[0].token == library.style("Wes Anderson").prompt
    assert weighted.terms[0].weight == schema.category("director_style").weight


def test_compose_matches_oracle_sum(schema, library):
    spec = select(
        schema,
        library,
        {
            "environment": ["beach", "office"],
            "lighting_effect": "hard",
            "clothing_style": ["t-shirt", "business attire"],
        },
        {"A": {"hair_length": "short"}, "B": {"clothing_color": "muted"}},
    )
    weight_table = {c.name: c.weight for c in schema.categories}
    expected = w_total_of(spec.selections, spec.character_overrides, weight_table)
    assert compose(spec, schema).w_total == pytest.approx(expected, abs=1e-9)


def test_serialize_prompt_round_trips_tokens(schema, library):
    spec = select(
        schema,
        library,
        {"environment": "beach", "time_of_day": "night", "lighting_effect": "key"},
    )
    weighted = compose(spec, schema)
    prompt = serialize_prompt(weighted)
    assert prompt == "(beach:3.00), (night:3.00), (key:2.00)"
    assert prompt_tokens(prompt) == ["beach", "night", "key"]


def test_style_prompts_survive_serialization(schema, library):
    # Style prompt text must not break the (token:weight) framing.
    for style in library.director_styles:
        spec = select(schema, library, {"director_style": style.name})
        weighted = compose(spec, schema)
        assert prompt_tokens(serialize_prompt(weighted)) == [style.prompt]


def test_spec_dict_round_trip(schema, library):
    spec = select(
        schema,
        library,
        {"environment": "beach", "director_style": "Russo Brothers"},
        {"Ethan": {"clothing_material": "leather"}},
    )
    assert spec_from_dict(spec_to_dict(spec)) == spec


def test_schema_category_unknown_raises(schema):
    with pytest.raises(SelectionError):
        schema.category("nope")


def test_menu_schema_direct_construction_validates_nothing():
    # build_schema owns the invariants; MenuSchema itself is a dumb holder.
    schema = MenuSchema(
        categories=(
            MenuCategory(name="a", tier=1, options=("x",), weight=1.0),
        )
    )
    assert schema.category("a").weight == 1.0
