"""Shot-metadata catalog: JSONL ingestion, curation filters, and indexed lookup.

Catalog files are UTF-8 JSON lines. The first line must be the header
``{"catalog_version": 1}``; every following non-blank line is one shot
record whose field names match ShotRecord's field names. Quality flags
(sharpness, exposure, face recognizability) are ingested metadata, not
computed from pixels.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import PrevizError

CATALOG_VERSION = 1

TIMES_OF_DAY = ("noon", "night", "sunrise_sunset", "unspecified")
SHOT_SCALES = ("close_up", "medium", "wide")
DEFAULT_MAX_CHARACTERS = 6


class FormatError(PrevizError):
    """Raised when the catalog header is missing or unsupported."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class NotFound(PrevizError):
    pass


def _normalize_tag(tag: str) -> str:
    return "_".join(tag.strip().lower().split())


@dataclass(frozen=True)
class ShotRecord:
    movie_id: str
    shot_id: str
    image_uri: str
    setting_tags: tuple[str, ...]
    time_of_day: str
    character_count: int
    character_genders: tuple[str, ...]  # multiset, stored sorted
    face_recognizability: float
    sharpness_ok: bool
    exposure_ok: bool
    shot_scale: str
    caption: str = ""

    @property
    def scene_key(self) -> str:
        primary = self.setting_tags[0] if self.setting_tags else "unknown"
        return f"{self.movie_id}/{primary}"

    def dominant_gender(self) -> str | None:
        """Most common gender among visible characters; None on tie or no data."""
        counts = Counter(g for g in self.character_genders if g != "unspecified")
        if not counts:
            return None
        ranked = counts.most_common(2)
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            return None
        return ranked[0][0]


def record_from_dict(data: dict) -> ShotRecord:
    """Build a validated ShotRecord from a decoded JSON object."""
    tags = tuple(_normalize_tag(t) for t in data["setting_tags"])
    genders = tuple(sorted(str(g).lower() for g in data["character_genders"]))
    count = int(data["character_count"])
    record = ShotRecord(
        movie_id=str(data["movie_id"]),
        shot_id=str(data["shot_id"]),
        image_uri=str(data["image_uri"]),
        setting_tags=tags,
        time_of_day=str(data["time_of_day"]),
        character_count=count,
        character_genders=genders,
        face_recognizability=float(data["face_recognizability"]),
        sharpness_ok=bool(data["sharpness_ok"]),
        exposure_ok=bool(data["exposure_ok"]),
        shot_scale=str(data["shot_scale"]),
        caption=str(data.get("caption", "")),
    )
    if not record.shot_id:
        raise ValueError("shot_id is empty")
    if record.time_of_day not in TIMES_OF_DAY:
        raise ValueError(f"unknown time_of_day {record.time_of_day!r}")
    if record.shot_scale not in SHOT_SCALES:
        raise ValueError(f"unknown shot_scale {record.shot_scale!r}")
    if count < 0:
        raise ValueError("character_count is negative")
    if len(genders) != count:
        raise ValueError(
            f"character_genders has {len(genders)} entries for character_count {count}"
        )
    if any(g not in ("male", "female", "unspecified") for g in genders):
        raise ValueError("unknown gender token in character_genders")
    if not 0.0 <= record.face_recognizability <= 1.0:
        raise ValueError("face_recognizability outside [0, 1]")
    return record


def record_to_dict(record: ShotRecord) -> dict:
    return {
        "movie_id": record.movie_id,
        "shot_id": record.shot_id,
        "image_uri": record.image_uri,
        "setting_tags": list(record.setting_tags),
        "time_of_day": record.time_of_day,
        "character_count": record.character_count,
        "character_genders": list(record.character_genders),
        "face_recognizability": record.face_recognizability,
        "sharpness_ok": record.sharpness_ok,
        "exposure_ok": record.exposure_ok,
        "shot_scale": record.shot_scale,
        "caption": record.caption,
    }


@dataclass(frozen=True)
class CurationRules:
    require_two_characters: bool = False
    require_sharp: bool = True
    require_exposure_ok: bool = True
    allowed_shot_scales: frozenset[str] = frozenset()  # empty = any scale
    max_characters: int = DEFAULT_MAX_CHARACTERS

    def __post_init__(self):
        if self.max_characters < 1:
            raise ValueError("max_characters must be >= 1")

    @classmethod
    def screening(cls) -> "CurationRules":
        """Strict profile: two-character close/medium dialogue shots only."""
        return cls(
            require_two_characters=True,
            require_sharp=True,
            require_exposure_ok=True,
            allowed_shot_scales=frozenset({"close_up", "medium"}),
        )

    @classmethod
    def permissive(cls) -> "CurationRules":
        return cls(
            require_two_characters=False,
            require_sharp=False,
            require_exposure_ok=False,
            allowed_shot_scales=frozenset(),
        )


def curation_filter(record: ShotRecord, rules: CurationRules) -> bool:
    """True iff the record satisfies every enabled curation rule."""
    if rules.require_sharp and not record.sharpness_ok:
        return False
    if rules.require_exposure_ok and not record.exposure_ok:
        return False
    if rules.allowed_shot_scales and record.shot_scale not in rules.allowed_shot_scales:
        return False
    if rules.require_two_characters and record.character_count != 2:
        return False
    return True


def complexity_filter(record: ShotRecord, max_characters: int = DEFAULT_MAX_CHARACTERS) -> bool:
    """True iff the shot stays at or under the visible-character budget."""
    if max_characters < 1:
        raise ValueError("max_characters must be >= 1")
    return record.character_count <= max_characters


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


class Catalog:
    """Build-once, read-many shot store with tag/time/count/scene indices."""

    def __init__(self):
        self._records: dict[str, ShotRecord] = {}
        self._by_tag: dict[str, list[str]] = {}
        self._by_time: dict[str, list[str]] = {}
        self._by_count: dict[int, list[str]] = {}
        self._by_scene: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, shot_id: str) -> bool:
        return shot_id in self._records

    def add(self, record: ShotRecord) -> None:
        if record.shot_id in self._records:
            raise ValueError(f"duplicate shot_id {record.shot_id!r}")
        self._records[record.shot_id] = record
        for tag in record.setting_tags:
            self._by_tag.setdefault(tag, []).append(record.shot_id)
        self._by_time.setdefault(record.time_of_day, []).append(record.shot_id)
        self._by_count.setdefault(record.character_count, []).append(record.shot_id)
        self._by_scene.setdefault(record.scene_key, []).append(record.shot_id)

    def records(self) -> Iterator[ShotRecord]:
        return iter(self._records.values())

    def lookup(self, shot_id: str) -> ShotRecord:
        try:
            return self._records[shot_id]
        except KeyError:
            raise NotFound(f"unknown shot_id {shot_id!r}") from None

    def find(
        self,
        tag: str | None = None,
        time_of_day: str | None = None,
        character_count: int | None = None,
    ) -> list[ShotRecord]:
        """Records satisfying all given predicates, ordered by shot_id."""
        ids: set[str] | None = None

        def narrow(candidate: Iterable[str]) -> None:
            nonlocal ids
            ids = set(candidate) if ids is None else ids & set(candidate)

        if tag is not None:
            narrow(self._by_tag.get(_normalize_tag(tag), []))
        if time_of_day is not None:
            narrow(self._by_time.get(time_of_day, []))
        if character_count is not None:
            narrow(self._by_count.get(character_count, []))
        if ids is None:
            ids = set(self._records)
        return [self._records[i] for i in sorted(ids)]

    def scene_keys(self) -> list[str]:
        return sorted(self._by_scene)

    def scene_shots(self, scene_key: str) -> list[ShotRecord]:
        return [self._records[i] for i in self._by_scene.get(scene_key, [])]


def ingest(
    stream: Iterable[str], rules: CurationRules | None = None
) -> tuple[Catalog, IngestReport]:
    """Ingest JSONL catalog lines, applying curation and complexity filters.

    Malformed record lines are counted as rejected with reason "malformed"
    and ingestion continues. A missing or unsupported header raises
    FormatError. accepted + rejected equals the number of record lines.
    """
    rules = rules or CurationRules()
    catalog = Catalog()
    report = IngestReport()

    lines = iter(enumerate(stream, start=1))
    header_line = None
    for line_no, raw in lines:
        if raw.strip():
            header_line = (line_no, raw)
            break
    if header_line is None:
        raise FormatError(1, "empty catalog stream (missing header)")
    try:
        header = json.loads(header_line[1])
        version = header["catalog_version"]
    except (json.JSONDecodeError, TypeError, KeyError):
        raise FormatError(header_line[0], "missing catalog_version header") from None
    if version != CATALOG_VERSION:
        raise FormatError(header_line[0], f"unsupported catalog_version {version!r}")

    for line_no, raw in lines:
        if not raw.strip():
            continue
        try:
            record = record_from_dict(json.loads(raw))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            report.reject("malformed")
            continue
        if record.shot_id in catalog:
            report.reject("duplicate")
            continue
        if not complexity_filter(record, rules.max_characters):
            report.reject("complexity")
            continue
        if rules.require_sharp and not record.sharpness_ok:
            report.reject("sharpness")
            continue
        if rules.require_exposure_ok and not record.exposure_ok:
            report.reject("exposure")
            continue
        if rules.allowed_shot_scales and record.shot_scale not in rules.allowed_shot_scales:
            report.reject("shot_scale")
            continue
        if rules.require_two_characters and record.character_count != 2:
            report.reject("two_characters")
            continue
        catalog.add(record)
        report.accepted += 1
    return catalog, report


def load_catalog(
    path: str | Path, rules: CurationRules | None = None
) -> tuple[Catalog, IngestReport]:
    with open(path, encoding="utf-8") as fh:
        return ingest(fh, rules)


def dump_catalog(records: Iterable[ShotRecord]) -> str:
    """Serialize records back to the JSONL format, header included."""
    out = [json.dumps({"catalog_version": CATALOG_VERSION})]
    out.extend(json.dumps(record_to_dict(r), sort_keys=True) for r in records)
    return "\n".join(out) + "\n"
