"""Stub generation server implementing the HTTP wire contract.

Renders with the deterministic mock rule, so a deployment can be smoke
tested end to end without model weights or a GPU.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import __version__
from .generation import GenerationRequest, encode_png, mock_render


def create_stub_app() -> FastAPI:
    app = FastAPI(title="previz generation stub", version=__version__)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__}

    @app.post("/generate")
    def generate(payload: dict):
        try:
            request = GenerationRequest.from_dict(payload)
        except (KeyError, TypeError, ValueError) as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})
        data = encode_png(mock_render(request))
        return {
            "request_id": request.request_id,
            "image_base64": base64.b64encode(data).decode("ascii"),
            "format": "png",
        }

    return app
