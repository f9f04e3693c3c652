"""Content-addressed image store: files named by SHA-256 with .png extension."""

from __future__ import annotations

import hashlib
from pathlib import Path

from .errors import PrevizError


class IntegrityError(PrevizError):
    pass


class MissingImage(PrevizError):
    pass


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class ImageStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, digest: str) -> Path:
        return self.root / f"{digest}.png"

    def __contains__(self, digest: str) -> bool:
        return self.path(digest).exists()

    def put(self, data: bytes) -> str:
        digest = content_hash(data)
        target = self.path(digest)
        if not target.exists():
            target.write_bytes(data)
        return digest

    def get(self, digest: str, verify: bool = True) -> bytes:
        target = self.path(digest)
        if not target.exists():
            raise MissingImage(f"no stored image for hash {digest}")
        data = target.read_bytes()
        if verify and content_hash(data) != digest:
            raise IntegrityError(f"stored bytes do not match hash {digest}")
        return data

    def digests(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.png"))
