"""Image-generation backends: deterministic mock and HTTP client.

The HTTP wire contract is POST {base_url}/generate with JSON
{request_id, base_image_uri, prompt, user_prompt, seed, width, height};
a 200 response carries {request_id, image_base64, format}. 5xx responses
are retried up to 2 times with exponential backoff starting at 500 ms.
Results are always PNG and must decode to the requested dimensions.
"""

from __future__ import annotations

import base64
import colorsys
import hashlib
import io
import re
import time
from dataclasses import dataclass

import httpx
import numpy as np
from PIL import Image

from .errors import PrevizError

DEFAULT_WIDTH = 960
DEFAULT_HEIGHT = 536
MAX_SEED = 2**64 - 1

RETRY_COUNT = 2
RETRY_BASE_DELAY = 0.5

# luminance bands keyed by time-of-day token found in the prompt
_LUMINANCE = {"noon": 0.8, "sunrise_sunset": 0.55, "night": 0.25}
_DEFAULT_LUMINANCE = 0.5


class BackendError(PrevizError):
    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"backend error {status}: {body[:200]}")


class BackendTimeout(PrevizError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    request_id: str
    base_image_uri: str
    prompt: str
    user_prompt: str | None = None
    seed: int = 0
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self):
        if not self.request_id:
            raise ValueError("request_id is empty")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError("seed outside the unsigned 64-bit range")
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be positive")

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "base_image_uri": self.base_image_uri,
            "prompt": self.prompt,
            "user_prompt": self.user_prompt,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationRequest":
        return cls(
            request_id=data["request_id"],
            base_image_uri=data["base_image_uri"],
            prompt=data["prompt"],
            user_prompt=data.get("user_prompt"),
            seed=int(data["seed"]),
            width=int(data["width"]),
            height=int(data["height"]),
        )


@dataclass(frozen=True)
class GenerationResult:
    request_id: str
    image_bytes: bytes
    format: str
    elapsed: float
    backend: str


@dataclass(frozen=True)
class BackendStatus:
    reachable: bool
    latency: float
    version: str | None = None
    detail: str | None = None


def prompt_tokens(prompt: str) -> list[str]:
    """Extract the token part of each ``(token:weight)`` segment."""
    return re.findall(r"\(([^:()]*):[0-9.]+\)", prompt)


def _hash_unit(data: str) -> float:
    digest = hashlib.sha256(data.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _draw_glyph(pixels: np.ndarray, hex8: str, x0: int, y0: int, cell: int = 4) -> None:
    """Render 8 hex chars as an 8-column x 4-row bit grid of black/white cells."""
    for col, ch in enumerate(hex8):
        bits = int(ch, 16)
        for row in range(4):
            value = 255 if (bits >> (3 - row)) & 1 else 0
            y = y0 + row * cell
            x = x0 + col * cell
            pixels[y : y + cell, x : x + cell] = value


def mock_render(request: GenerationRequest) -> np.ndarray:
    """Deterministic fill rule for the mock backend.

    Base hue comes from a stable hash of base_image_uri; the luminance
    band follows the time-of-day token in the prompt (noon 0.8,
    sunrise_sunset 0.55, night 0.25, absent 0.5); a horizontal gradient
    brightens the side named by the light-direction token; the top-left
    glyph encodes the first 8 hex chars of the prompt hash and the
    top-right glyph a hash of (seed, user_prompt, base_image_uri).
    """
    tokens = prompt_tokens(request.prompt)
    luminance = _DEFAULT_LUMINANCE
    for name, value in _LUMINANCE.items():
        if name in tokens:
            luminance = value
            break
    hue = _hash_unit(request.base_image_uri)
    r, g, b = colorsys.hsv_to_rgb(hue, 0.5, luminance)
    base = np.array([r, g, b], dtype=np.float64)

    w, h = request.width, request.height
    ramp = np.ones(w, dtype=np.float64)
    if "left" in tokens:
        ramp = np.linspace(1.15, 0.85, w)
    elif "right" in tokens:
        ramp = np.linspace(0.85, 1.15, w)
    field = base[None, None, :] * ramp[None, :, None]
    pixels = np.clip(field * 255.0, 0, 255).astype(np.uint8)
    pixels = np.broadcast_to(pixels, (h, w, 3)).copy()

    prompt_hash = hashlib.sha256(request.prompt.encode("utf-8")).hexdigest()[:8]
    aux = f"{request.seed}:{request.user_prompt or ''}:{request.base_image_uri}"
    aux_hash = hashlib.sha256(aux.encode("utf-8")).hexdigest()[:8]
    _draw_glyph(pixels, prompt_hash, x0=0, y0=0)
    _draw_glyph(pixels, aux_hash, x0=w - 32, y0=0)
    return pixels


def encode_png(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as img:
        return np.asarray(img.convert("RGB"))


class MockBackend:
    """Pure-function backend: identical requests yield identical bytes."""

    kind = "mock"

    def generate(self, request: GenerationRequest) -> GenerationResult:
        start = time.monotonic()
        data = encode_png(mock_render(request))
        return GenerationResult(
            request_id=request.request_id,
            image_bytes=data,
            format="png",
            elapsed=time.monotonic() - start,
            backend="mock",
        )

    def health(self) -> BackendStatus:
        return BackendStatus(reachable=True, latency=0.0, version="mock")


class HttpBackend:
    """Client for a diffusion relighting/stylization server."""

    kind = "http"

    def __init__(
        self,
        base_url: str,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
        retry_delay: float = RETRY_BASE_DELAY,
    ):
        self.base_url = base_url.rstrip("/")
        self._retry_delay = retry_delay
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        start = time.monotonic()
        response = None
        for attempt in range(RETRY_COUNT + 1):
            try:
                response = self._client.post("/generate", json=request.to_dict())
            except httpx.TimeoutException as exc:
                raise BackendTimeout(str(exc)) from exc
            except httpx.TransportError as exc:
                raise BackendError(0, str(exc)) from exc
            if response.status_code < 500:
                break
            if attempt < RETRY_COUNT:
                time.sleep(self._retry_delay * 2**attempt)
        if response.status_code != 200:
            raise BackendError(response.status_code, response.text)
        payload = response.json()
        if payload.get("request_id") != request.request_id:
            raise BackendError(200, f"request_id mismatch: {payload.get('request_id')!r}")
        image_bytes = base64.b64decode(payload["image_base64"])
        pixels = decode_png(image_bytes)
        if pixels.shape[:2] != (request.height, request.width):
            raise BackendError(
                200,
                f"resolution contract violated: got {pixels.shape[1]}x{pixels.shape[0]}, "
                f"want {request.width}x{request.height}",
            )
        return GenerationResult(
            request_id=request.request_id,
            image_bytes=image_bytes,
            format=payload.get("format", "png"),
            elapsed=time.monotonic() - start,
            backend="http",
        )

    def health(self) -> BackendStatus:
        start = time.monotonic()
        try:
            response = self._client.get("/healthz")
        except httpx.HTTPError as exc:
            return BackendStatus(
                reachable=False, latency=time.monotonic() - start, detail=str(exc)
            )
        latency = time.monotonic() - start
        if response.status_code != 200:
            return BackendStatus(
                reachable=False, latency=latency, detail=f"status {response.status_code}"
            )
        version = None
        try:
            version = response.json().get("version")
        except ValueError:
            pass
        return BackendStatus(reachable=True, latency=latency, version=version)


Backend = MockBackend | HttpBackend


def generate(request: GenerationRequest, backend) -> GenerationResult:
    """Dispatch one request; results satisfy the dimension and echo contracts."""
    return backend.generate(request)


def health_check(backend) -> BackendStatus:
    """Failures are reported as statuses, never raised."""
    try:
        return backend.health()
    except Exception as exc:  # noqa: BLE001 - health must not throw
        return BackendStatus(reachable=False, latency=0.0, detail=str(exc))
