"""Query compilation, text-tag similarity scoring, and shot-group assembly.

Fixed attributes are hard filters; variable attributes only steer ranking.
Candidate scenes are scored by cosine similarity between the query's
setting text and each shot's tags+caption, blended with the shot's face
recognizability, then assembled into one establishing frame plus one frame
per dialogue line.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .catalog import Catalog, ShotRecord
from .errors import PrevizError
from .screenplay import Script

FIXED_KEYS = ("location_tag", "time_of_day", "character_count", "character_genders")
VARIABLE_KEYS = FIXED_KEYS + ("setting_text",)

DEFAULT_EMBED_DIM = 64
DEFAULT_ALPHA = 0.7
DEFAULT_BETA = 0.3


class QueryError(PrevizError):
    pass


class NoMatch(PrevizError):
    pass


class EmbedderUnavailable(PrevizError):
    """Raised when a remote encoder backend cannot be reached."""


@dataclass(frozen=True)
class SceneQuery:
    fixed: dict
    variable: dict

    def __post_init__(self):
        for key in self.fixed:
            if key not in FIXED_KEYS:
                raise QueryError(f"unknown fixed attribute {key!r}")
        for key in self.variable:
            if key not in VARIABLE_KEYS:
                raise QueryError(f"unknown variable attribute {key!r}")
        overlap = set(self.fixed) & set(self.variable)
        if overlap:
            raise QueryError(f"attributes both fixed and variable: {', '.join(sorted(overlap))}")

    def setting_text(self) -> str:
        """Free text used for similarity; falls back to location/time attribute values."""
        if "setting_text" in self.variable:
            return str(self.variable["setting_text"])
        parts = []
        for key in ("location_tag", "time_of_day"):
            value = self.fixed.get(key, self.variable.get(key))
            if value:
                parts.append(str(value))
        return " ".join(parts)

    def to_dict(self) -> dict:
        return {"fixed": dict(self.fixed), "variable": dict(self.variable)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneQuery":
        return cls(fixed=dict(data.get("fixed", {})), variable=dict(data.get("variable", {})))


def compile_query(
    script: Script,
    fixed: Mapping | None = None,
    variable: Mapping | None = None,
) -> SceneQuery:
    """Build a SceneQuery from director selections, defaulting cast facts.

    Attributes the director is certain about go in ``fixed``; uncertain
    ones in ``variable``. Character count and genders default from the
    script's cast into fixed when neither map mentions them.
    """
    fixed = dict(fixed or {})
    variable = dict(variable or {})
    mentioned = set(fixed) | set(variable)
    if "character_count" not in mentioned:
        fixed["character_count"] = len(script.characters)
    if "character_genders" not in mentioned:
        fixed["character_genders"] = sorted(c.gender for c in script.characters)
    return SceneQuery(fixed=fixed, variable=variable)


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedEmbedder:
    """Deterministic hashed bag-of-words embedder for ranking tests.

    Tokens are lowercased alphanumeric runs, hashed into ``dim`` buckets
    with a seeded stable hash, counted, then L2 normalized. Production
    deployments bind a real text encoder behind the same interface.
    """

    def __init__(self, dim: int = DEFAULT_EMBED_DIM, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(
            f"{self.seed}:{token}".encode("utf-8"), digest_size=8
        ).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        tokens = re.findall(r"[a-z0-9]+", text.lower())
        if not tokens:
            raise ValueError("cannot embed text with no tokens")
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            vec[self._bucket(token)] += 1.0
        return vec / np.linalg.norm(vec)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b))


@dataclass(frozen=True)
class ScoreWeights:
    alpha: float = DEFAULT_ALPHA  # similarity weight
    beta: float = DEFAULT_BETA  # face recognizability weight

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("weights must be non-negative with a positive sum")


@dataclass(frozen=True)
class ScoredShot:
    record: ShotRecord
    similarity: float
    combined_score: float


def record_text(record: ShotRecord) -> str:
    return " ".join((*record.setting_tags, record.caption)).strip()


def score_shot(
    record: ShotRecord,
    query: SceneQuery,
    weights: ScoreWeights | None = None,
    embedder: Embedder | None = None,
) -> ScoredShot:
    """Blend text-tag similarity with face recognizability."""
    weights = weights or ScoreWeights()
    embedder = embedder or HashedEmbedder()
    qtext = query.setting_text()
    rtext = record_text(record)
    similarity = 0.0
    if qtext.strip() and rtext:
        similarity = cosine(embedder.embed(qtext), embedder.embed(rtext))
    combined = weights.alpha * similarity + weights.beta * record.face_recognizability
    return ScoredShot(record=record, similarity=similarity, combined_score=combined)


@dataclass(frozen=True)
class ShotGroup:
    group_id: str
    scene_key: str
    establishing: ScoredShot
    dialogue_frames: tuple[ScoredShot, ...]

    def mean_score(self) -> float:
        scores = [self.establishing.combined_score]
        scores.extend(f.combined_score for f in self.dialogue_frames)
        return sum(scores) / len(scores)

    def members(self) -> tuple[ScoredShot, ...]:
        return (self.establishing, *self.dialogue_frames)


def passes_fixed(record: ShotRecord, query: SceneQuery) -> bool:
    """Hard-filter one record against the query's fixed attributes."""
    fixed = query.fixed
    if "location_tag" in fixed and fixed["location_tag"] not in record.setting_tags:
        return False
    if "time_of_day" in fixed and record.time_of_day != fixed["time_of_day"]:
        return False
    if "character_count" in fixed and record.character_count != int(fixed["character_count"]):
        return False
    if "character_genders" in fixed:
        wanted = tuple(sorted(str(g).lower() for g in fixed["character_genders"]))
        if record.character_genders != wanted:
            return False
    return True


def _rank_key(shot: ScoredShot) -> tuple:
    return (-shot.combined_score, shot.record.shot_id)


def build_group(
    scene_key: str, scored: list[ScoredShot], script: Script
) -> ShotGroup:
    """Assemble one group: establishing frame plus per-line dialogue frames.

    The establishing frame is the best wide shot when the scene has one,
    else the best shot of any scale. Dialogue lines prefer shots whose
    dominant gender matches the speaker; shots are reused cyclically when
    the scene runs short.
    """
    wide = [s for s in scored if s.record.shot_scale == "wide"]
    establishing = min(wide or scored, key=_rank_key)
    remaining = [s for s in scored if s.record.shot_id != establishing.record.shot_id]
    ranked = sorted(remaining or [establishing], key=_rank_key)

    pools: dict[str, list[ScoredShot]] = {}
    for shot in ranked:
        gender = shot.record.dominant_gender()
        if gender:
            pools.setdefault(gender, []).append(shot)
    counters: dict[str, int] = {}
    fallback = 0

    frames: list[ScoredShot] = []
    for line in script.lines:
        decl = script.character(line.speaker)
        gender = decl.gender if decl else "unspecified"
        pool = pools.get(gender)
        if pool:
            idx = counters.get(gender, 0)
            frames.append(pool[idx % len(pool)])
            counters[gender] = idx + 1
        else:
            frames.append(ranked[fallback % len(ranked)])
            fallback += 1
    return ShotGroup(
        group_id=scene_key,
        scene_key=scene_key,
        establishing=establishing,
        dialogue_frames=tuple(frames),
    )


def match(
    script: Script,
    query: SceneQuery,
    catalog: Catalog,
    k: int = 3,
    weights: ScoreWeights | None = None,
    embedder: Embedder | None = None,
) -> list[ShotGroup]:
    """Top-k shot groups from scenes surviving the fixed-attribute filters.

    Groups are ranked by mean combined score, ties broken by scene key.
    Raises NoMatch when no scene survives; the caller may relax fixed
    attributes into variable ones and retry.
    """
    if k < 1:
        raise QueryError(f"k must be >= 1, got {k}")
    weights = weights or ScoreWeights()
    embedder = embedder or HashedEmbedder()

    scenes: dict[str, list[ScoredShot]] = {}
    for record in catalog.records():
        if not passes_fixed(record, query):
            continue
        scored = score_shot(record, query, weights, embedder)
        scenes.setdefault(record.scene_key, []).append(scored)
    if not scenes:
        raise NoMatch("no scenes satisfy the fixed attributes")

    groups = [build_group(key, shots, script) for key, shots in scenes.items()]
    groups.sort(key=lambda g: (-g.mean_score(), g.scene_key))
    return groups[:k]


def scored_shot_to_dict(shot: ScoredShot) -> dict:
    from .catalog import record_to_dict

    return {
        "record": record_to_dict(shot.record),
        "similarity": shot.similarity,
        "combined_score": shot.combined_score,
    }


def scored_shot_from_dict(data: dict) -> ScoredShot:
    from .catalog import record_from_dict

    return ScoredShot(
        record=record_from_dict(data["record"]),
        similarity=float(data["similarity"]),
        combined_score=float(data["combined_score"]),
    )


def group_to_dict(group: ShotGroup) -> dict:
    return {
        "group_id": group.group_id,
        "scene_key": group.scene_key,
        "establishing": scored_shot_to_dict(group.establishing),
        "dialogue_frames": [scored_shot_to_dict(s) for s in group.dialogue_frames],
    }


def group_from_dict(data: dict) -> ShotGroup:
    return ShotGroup(
        group_id=data["group_id"],
        scene_key=data["scene_key"],
        establishing=scored_shot_from_dict(data["establishing"]),
        dialogue_frames=tuple(scored_shot_from_dict(s) for s in data["dialogue_frames"]),
    )
