"""Two-tier menu schema, preset library, and weighted prompt composition.

Tier-1 menus carry scene-level choices (environment, light, time, director
style, basic actor attributes); tier-2 menus refine character detail and
costume. Every category has a weight, every selection contributes one
weighted term, and the total weighted input is the dot product of weights
and selection indicators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import PrevizError

PRESETS_VERSION = 1

TIER1_CATEGORIES = (
    "environment",
    "light_direction",
    "time_of_day",
    "director_style",
    "lighting_effect",
    "actor_expression",
    "actor_facial_feature_class",
    "hairstyle",
)
TIER2_CATEGORIES = (
    "facial_detail",
    "hair_length",
    "hair_color",
    "clothing_style",
    "clothing_material",
    "clothing_color",
)
ALL_CATEGORIES = TIER1_CATEGORIES + TIER2_CATEGORIES

# Categories weighted above the rest of tier 1: environment, time of day,
# the actors' basic attributes, and director style.
EMPHASIZED_TIER1 = (
    "environment",
    "time_of_day",
    "director_style",
    "actor_expression",
    "actor_facial_feature_class",
)

REQUIRED_TIMES = frozenset({"noon", "night", "sunrise_sunset"})
REQUIRED_LIGHT_TYPES = frozenset({"soft", "hard", "key"})
REQUIRED_LIGHT_DIRECTIONS = frozenset({"left", "right"})
REQUIRED_STYLE_COUNT = 10
REQUIRED_STYLE_NAMES = (
    "Wes Anderson",
    "Martin Scorsese",
    "Stanley Kubrick",
    "Ridley Scott",
    "Russo Brothers",
)
MIN_BACKGROUNDS = 100

# Option vocabularies for menu categories the preset file does not carry.
ACTOR_EXPRESSIONS = (
    "angry",
    "joyful",
    "sad",
    "calm",
    "fearful",
    "surprised",
    "tired",
    "wide smile",
)
ACTOR_FACIAL_FEATURE_CLASSES = ("eyes", "nose", "mouth", "eyebrows", "jawline")
HAIRSTYLES = (
    "short straight",
    "long straight",
    "curly",
    "wavy",
    "ponytail",
    "bun",
    "buzz cut",
    "bob cut",
)
FACIAL_DETAILS = (
    "tired eyes",
    "bright eyes",
    "large wide nose",
    "narrow nose",
    "wide smile mouth",
    "thin lips",
    "soft cheekbones",
    "sharp cheekbones",
)
HAIR_LENGTHS = ("short", "medium", "long")
HAIR_COLORS = ("black", "brown", "blonde", "red", "grey", "pink", "white")
CLOTHING_STYLES = (
    "modern",
    "vintage",
    "formal",
    "casual",
    "business attire",
    "t-shirt",
    "tank top",
    "dress",
    "period costume",
)
CLOTHING_MATERIALS = ("leather", "silk", "denim", "cotton", "wool", "linen")
CLOTHING_COLORS = ("bold", "soft", "muted", "black", "white", "earth tones")


class PresetError(PrevizError):
    pass


class SelectionError(PrevizError):
    def __init__(self, category: str, token: str | None, reason: str):
        self.category = category
        self.token = token
        super().__init__(reason)


class UnknownStyle(PrevizError):
    pass


@dataclass(frozen=True)
class DirectorStyle:
    name: str
    prompt: str


@dataclass(frozen=True)
class FramingPreset:
    id: str
    description: str
    character_slots: int


@dataclass(frozen=True)
class PresetLibrary:
    backgrounds: tuple[str, ...]
    times: tuple[str, ...]
    light_types: tuple[str, ...]
    light_directions: tuple[str, ...]
    director_styles: tuple[DirectorStyle, ...]
    framings: tuple[FramingPreset, ...]
    weights: dict[str, float]

    def style(self, name: str) -> DirectorStyle:
        for s in self.director_styles:
            if s.name == name:
                return s
        raise UnknownStyle(f"unknown director style {name!r}")

    def style_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.director_styles)


@dataclass(frozen=True)
class MenuCategory:
    name: str
    tier: int
    options: tuple[str, ...]
    weight: float


@dataclass(frozen=True)
class MenuSchema:
    categories: tuple[MenuCategory, ...]

    def category(self, name: str) -> MenuCategory:
        for cat in self.categories:
            if cat.name == name:
                return cat
        raise SelectionError(name, None, f"unknown category {name!r}")

    def tier_weights(self, tier: int) -> list[float]:
        return [c.weight for c in self.categories if c.tier == tier]


def default_presets_path() -> Path:
    return Path(__file__).parent / "data" / "presets.json"


def load_presets(path: str | Path | None = None) -> PresetLibrary:
    """Load and validate a preset library file.

    Raises PresetError naming the violated count or field.
    """
    path = Path(path) if path is not None else default_presets_path()
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise PresetError(f"preset file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise PresetError(f"preset file is not valid JSON: {exc}") from None

    if data.get("presets_version") != PRESETS_VERSION:
        raise PresetError(f"presets_version: {data.get('presets_version')!r} != {PRESETS_VERSION}")

    try:
        library = PresetLibrary(
            backgrounds=tuple(data["backgrounds"]),
            times=tuple(data["times"]),
            light_types=tuple(data["light_types"]),
            light_directions=tuple(data["light_directions"]),
            director_styles=tuple(
                DirectorStyle(name=s["name"], prompt=s["prompt"]) for s in data["director_styles"]
            ),
            framings=tuple(
                FramingPreset(
                    id=f["id"],
                    description=f["description"],
                    character_slots=int(f["character_slots"]),
                )
                for f in data["framings"]
            ),
            weights={k: float(v) for k, v in data["weights"].items()},
        )
    except (KeyError, TypeError) as exc:
        raise PresetError(f"preset file missing field: {exc}") from None

    if len(library.backgrounds) < MIN_BACKGROUNDS:
        raise PresetError(f"backgrounds: {len(library.backgrounds)} < {MIN_BACKGROUNDS}")
    if len(library.director_styles) != REQUIRED_STYLE_COUNT:
        raise PresetError(f"director_styles: {len(library.director_styles)} != {REQUIRED_STYLE_COUNT}")
    names = set(library.style_names())
    missing = [n for n in REQUIRED_STYLE_NAMES if n not in names]
    if missing:
        raise PresetError(f"director_styles missing: {', '.join(missing)}")
    if set(library.times) != REQUIRED_TIMES:
        raise PresetError(f"times: {sorted(library.times)} != {sorted(REQUIRED_TIMES)}")
    if set(library.light_types) != REQUIRED_LIGHT_TYPES:
        raise PresetError(f"light_types: {sorted(library.light_types)} != {sorted(REQUIRED_LIGHT_TYPES)}")
    if set(library.light_directions) != REQUIRED_LIGHT_DIRECTIONS:
        raise PresetError(
            f"light_directions: {sorted(library.light_directions)} != {sorted(REQUIRED_LIGHT_DIRECTIONS)}"
        )
    missing_weights = [c for c in ALL_CATEGORIES if c not in library.weights]
    if missing_weights:
        raise PresetError(f"weights missing: {', '.join(missing_weights)}")
    return library


def build_schema(library: PresetLibrary) -> MenuSchema:
    """Assemble the two-tier menu schema from a preset library.

    Raises PresetError when the weight table violates the tier orderings.
    """
    option_sources = {
        "environment": library.backgrounds,
        "light_direction": library.light_directions,
        "time_of_day": library.times,
        "director_style": library.style_names(),
        "lighting_effect": library.light_types,
        "actor_expression": ACTOR_EXPRESSIONS,
        "actor_facial_feature_class": ACTOR_FACIAL_FEATURE_CLASSES,
        "hairstyle": HAIRSTYLES,
        "facial_detail": FACIAL_DETAILS,
        "hair_length": HAIR_LENGTHS,
        "hair_color": HAIR_COLORS,
        "clothing_style": CLOTHING_STYLES,
        "clothing_material": CLOTHING_MATERIALS,
        "clothing_color": CLOTHING_COLORS,
    }
    categories = tuple(
        MenuCategory(
            name=name,
            tier=1 if name in TIER1_CATEGORIES else 2,
            options=tuple(option_sources[name]),
            weight=library.weights[name],
        )
        for name in ALL_CATEGORIES
    )
    schema = MenuSchema(categories=categories)
    _check_tier_ordering(schema)
    return schema


def _check_tier_ordering(schema: MenuSchema) -> None:
    tier1 = schema.tier_weights(1)
    tier2 = schema.tier_weights(2)
    if min(tier1) <= max(tier2):
        raise PresetError(f"weights: min(tier1)={min(tier1)} <= max(tier2)={max(tier2)}")
    emphasized = [c.weight for c in schema.categories if c.name in EMPHASIZED_TIER1]
    others = [c.weight for c in schema.categories if c.tier == 1 and c.name not in EMPHASIZED_TIER1]
    if others and min(emphasized) <= max(others):
        raise PresetError("weights: emphasized tier-1 categories must outweigh the rest of tier 1")
    facial = schema.category("facial_detail").weight
    other2 = [c.weight for c in schema.categories if c.tier == 2 and c.name != "facial_detail"]
    if other2 and facial <= max(other2):
        raise PresetError("weights: facial_detail must outweigh the rest of tier 2")


@dataclass(frozen=True)
class PromptSpec:
    """Validated menu selections, optionally with per-character overrides."""

    selections: dict[str, tuple[str, ...]] = field(default_factory=dict)
    character_overrides: dict[str, dict[str, tuple[str, ...]]] = field(default_factory=dict)
    style_text: str | None = None

    def selected(self, category: str) -> tuple[str, ...]:
        return self.selections.get(category, ())


def _as_tokens(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    return tuple(value)


def select(
    schema: MenuSchema,
    library: PresetLibrary,
    choices: dict,
    character_overrides: dict | None = None,
) -> PromptSpec:
    """Validate menu choices into a PromptSpec.

    Unselected categories stay absent; no defaults are injected. Raises
    SelectionError on unknown categories or tokens.
    """

    def validate_block(block: dict) -> dict[str, tuple[str, ...]]:
        validated: dict[str, tuple[str, ...]] = {}
        for category, value in block.items():
            cat = schema.category(category)  # raises on unknown category
            tokens = _as_tokens(value)
            for token in tokens:
                if token not in cat.options:
                    raise SelectionError(
                        category, token, f"unknown token {token!r} for category {category!r}"
                    )
            if tokens:
                validated[category] = tokens
        return validated

    selections = validate_block(choices)
    overrides = {
        name: validate_block(block) for name, block in (character_overrides or {}).items()
    }
    style_text = None
    if "director_style" in selections:
        style_text = library.style(selections["director_style"][-1]).prompt
    return PromptSpec(selections=selections, character_overrides=overrides, style_text=style_text)


def apply_director_style(spec: PromptSpec, style_name: str, library: PresetLibrary) -> PromptSpec:
    """Replace the spec's director style (last write wins) and attach its prompt text."""
    style = library.style(style_name)  # raises UnknownStyle
    selections = dict(spec.selections)
    selections["director_style"] = (style.name,)
    return replace(spec, selections=selections, style_text=style.prompt)


@dataclass(frozen=True)
class PromptTerm:
    token: str
    weight: float
    x: float  # selection indicator; 1.0 when chosen


@dataclass(frozen=True)
class WeightedPromptInput:
    terms: tuple[PromptTerm, ...]
    w_total: float


def compose(spec: PromptSpec, schema: MenuSchema) -> WeightedPromptInput:
    """Flatten a PromptSpec into weighted terms; w_total is the weighted sum.

    One term per selected token, in schema category order; per-character
    override tokens follow, prefixed with the character's name. The
    director-style term carries the style's prompt text when attached.
    """
    terms: list[PromptTerm] = []
    for cat in schema.categories:
        for token in spec.selected(cat.name):
            text = token
            if cat.name == "director_style" and spec.style_text:
                text = spec.style_text
            terms.append(PromptTerm(token=text, weight=cat.weight, x=1.0))
    for name in sorted(spec.character_overrides):
        block = spec.character_overrides[name]
        for cat in schema.categories:
            for token in block.get(cat.name, ()):
                terms.append(PromptTerm(token=f"{name} {token}", weight=cat.weight, x=1.0))
    w_total = sum(t.weight * t.x for t in terms)
    return WeightedPromptInput(terms=tuple(terms), w_total=w_total)


def serialize_prompt(weighted: WeightedPromptInput) -> str:
    """Canonical ``(token:weight)`` string, comma separated, 2-decimal weights."""
    return ", ".join(f"({t.token}:{t.weight:.2f})" for t in weighted.terms)


def spec_to_dict(spec: PromptSpec) -> dict:
    return {
        "selections": {k: list(v) for k, v in spec.selections.items()},
        "character_overrides": {
            name: {k: list(v) for k, v in block.items()}
            for name, block in spec.character_overrides.items()
        },
        "style_text": spec.style_text,
    }


def spec_from_dict(data: dict) -> PromptSpec:
    return PromptSpec(
        selections={k: tuple(v) for k, v in data.get("selections", {}).items()},
        character_overrides={
            name: {k: tuple(v) for k, v in block.items()}
            for name, block in data.get("character_overrides", {}).items()
        },
        style_text=data.get("style_text"),
    )
