"""Engine configuration: JSON file with env-var backend override.

Format:

    {
      "backend": {"kind": "mock" | "http", "url": "http://host:port"},
      "retrieval": {"alpha": 0.7, "beta": 0.3, "k": 3},
      "generation": {"width": 960, "height": 536}
    }

All keys optional; PREVIZ_BACKEND_URL overrides backend.url.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .generation import DEFAULT_HEIGHT, DEFAULT_WIDTH, HttpBackend, MockBackend
from .retrieval import DEFAULT_ALPHA, DEFAULT_BETA, ScoreWeights

BACKEND_URL_ENV = "PREVIZ_BACKEND_URL"


@dataclass(frozen=True)
class Config:
    backend_kind: str = "mock"
    backend_url: str = "http://127.0.0.1:8085"
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    k: int = 3
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def score_weights(self) -> ScoreWeights:
        return ScoreWeights(alpha=self.alpha, beta=self.beta)

    def make_backend(self):
        if self.backend_kind == "http":
            return HttpBackend(self.backend_url)
        return MockBackend()


def load_config(path: str | Path | None = None) -> Config:
    data: dict = {}
    if path is not None:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    backend = data.get("backend", {})
    retrieval = data.get("retrieval", {})
    generation = data.get("generation", {})
    url = os.environ.get(BACKEND_URL_ENV) or backend.get("url", Config.backend_url)
    return Config(
        backend_kind=backend.get("kind", Config.backend_kind),
        backend_url=url,
        alpha=float(retrieval.get("alpha", DEFAULT_ALPHA)),
        beta=float(retrieval.get("beta", DEFAULT_BETA)),
        k=int(retrieval.get("k", Config.k)),
        width=int(generation.get("width", DEFAULT_WIDTH)),
        height=int(generation.get("height", DEFAULT_HEIGHT)),
    )
