"""REST service wiring screenplay, retrieval, prompting, generation, session.

Error responses always carry {code, message, locus} with a code from:
parse_error, no_match, unknown_style, backend_error, not_found, conflict.
Session mutations are serialized per session id; reads are lock-free.
"""

from __future__ import annotations

import hashlib
import secrets
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__
from .catalog import Catalog, NotFound
from .config import Config
from .errors import PrevizError
from .generation import BackendError, BackendTimeout, health_check
from .prompting import (
    MenuSchema,
    PresetLibrary,
    PromptSpec,
    SelectionError,
    UnknownStyle,
    select,
    spec_to_dict,
)
from .retrieval import NoMatch, QueryError, ShotGroup, compile_query, match
from .screenplay import ParseError, Script, parse_script, script_to_dict
from .session import (
    MismatchError,
    NoPinnedFrames,
    Session,
    UnknownFrame,
    create_session,
    export_manifest,
    pin,
    render_all,
    reshot,
    unpin,
)
from .store import ImageStore, IntegrityError, MissingImage


@dataclass
class ApiError(Exception):
    code: str
    message: str
    status: int
    locus: str | None = None

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, "locus": self.locus}


@dataclass
class AppState:
    catalog: Catalog
    library: PresetLibrary
    schema: MenuSchema
    backend: object
    store: ImageStore
    config: Config
    scripts: dict[str, Script] = field(default_factory=dict)
    script_texts: dict[str, str] = field(default_factory=dict)
    groups: dict[str, dict[str, ShotGroup]] = field(default_factory=dict)
    sessions: dict[str, Session] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)
    _counter: int = 0

    def next_script_id(self) -> str:
        self._counter += 1
        return f"script-{self._counter:04d}"


def _session_id_for(script_id: str, group_id: str, master_seed: int, taken) -> str:
    basis = f"{script_id}:{group_id}:{master_seed}"
    digest = hashlib.sha256(basis.encode("utf-8")).hexdigest()[:12]
    candidate = f"session-{digest}"
    n = 1
    while candidate in taken:
        n += 1
        candidate = f"session-{digest}-{n}"
    return candidate


def _require(payload: dict, key: str):
    if key not in payload or payload[key] is None:
        raise ApiError("parse_error", f"missing field {key!r}", 422, locus=key)
    return payload[key]


def _parse_settings(state: AppState, data: dict | None) -> PromptSpec:
    data = data or {}
    return select(
        state.schema,
        state.library,
        data.get("selections", {}),
        data.get("character_overrides"),
    )


def _shot_summary(scored) -> dict:
    return {
        "shot_id": scored.record.shot_id,
        "image_uri": scored.record.image_uri,
        "shot_scale": scored.record.shot_scale,
        "similarity": scored.similarity,
        "combined_score": scored.combined_score,
    }


def _board(state: AppState, session: Session) -> dict:
    lines = {line.index: line for line in session.script.lines}
    frames = []
    for frame in session.frames:
        line = lines.get(frame.line_index)

        def rev_view(revision):
            if revision is None:
                return None
            return {
                "revision_no": revision.revision_no,
                "image": revision.image_hash,
                "prompt": revision.request.prompt,
                "seed": revision.request.seed,
            }

        frames.append(
            {
                "frame_id": frame.frame_id,
                "line_index": frame.line_index,
                "speaker": line.speaker if line else None,
                "text": line.text if line else None,
                "source_shot_id": frame.source_shot_id,
                "source_image_uri": session.source_uri(frame),
                "pinned": frame.pinned,
                "revision_count": len(frame.revisions),
                "latest": rev_view(frame.latest),
                "original": rev_view(frame.original),
            }
        )
    return {
        "session_id": session.session_id,
        "created_at": session.created_at,
        "updated_at": session.updated_at,
        "settings": spec_to_dict(session.settings),
        "frames": frames,
    }


def _get_script(state: AppState, script_id: str) -> Script:
    if script_id not in state.scripts:
        raise ApiError("not_found", f"unknown script {script_id!r}", 404)
    return state.scripts[script_id]


def _get_session(state: AppState, session_id: str) -> Session:
    if session_id not in state.sessions:
        raise ApiError("not_found", f"unknown session {session_id!r}", 404)
    return state.sessions[session_id]


def create_app(
    catalog: Catalog,
    library: PresetLibrary,
    schema: MenuSchema,
    backend,
    store: ImageStore,
    config: Config | None = None,
) -> FastAPI:
    config = config or Config()
    state = AppState(
        catalog=catalog,
        library=library,
        schema=schema,
        backend=backend,
        store=store,
        config=config,
    )
    app = FastAPI(title="previz", version=__version__)
    app.state.previz = state

    @app.exception_handler(ApiError)
    async def api_error_handler(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_req: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"code": "parse_error", "message": str(exc.errors()[:1]), "locus": None},
        )

    @app.exception_handler(PrevizError)
    async def previz_error_handler(_req: Request, exc: PrevizError):
        mapped = _map_error(exc)
        return JSONResponse(status_code=mapped.status, content=mapped.body())

    @app.exception_handler(Exception)
    async def fallback_handler(_req: Request, _exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"code": "backend_error", "message": "internal error", "locus": None},
        )

    @app.get("/healthz")
    def healthz():
        status = health_check(state.backend)
        return {
            "status": "ok",
            "version": __version__,
            "backend": getattr(state.backend, "kind", "unknown"),
            "backend_reachable": status.reachable,
        }

    @app.get("/presets")
    def presets():
        return {
            "backgrounds": list(state.library.backgrounds),
            "times": list(state.library.times),
            "light_types": list(state.library.light_types),
            "light_directions": list(state.library.light_directions),
            "director_styles": [
                {"name": s.name, "prompt": s.prompt} for s in state.library.director_styles
            ],
            "framings": [
                {"id": f.id, "description": f.description, "character_slots": f.character_slots}
                for f in state.library.framings
            ],
            "menus": [
                {
                    "category": c.name,
                    "tier": c.tier,
                    "weight": c.weight,
                    "options": list(c.options),
                }
                for c in state.schema.categories
            ],
        }

    @app.post("/scripts")
    def post_script(payload: dict):
        text = _require(payload, "text")
        try:
            script = parse_script(text)
        except ParseError as exc:
            raise ApiError("parse_error", exc.reason, 422, locus=f"line {exc.line_no}")
        script_id = state.next_script_id()
        state.scripts[script_id] = script
        state.script_texts[script_id] = text
        return {"script_id": script_id, "script": script_to_dict(script)}

    @app.post("/match")
    def post_match(payload: dict):
        script_id = _require(payload, "script_id")
        script = _get_script(state, script_id)
        query_data = payload.get("query", {}) or {}
        k = payload.get("k", state.config.k)
        if not isinstance(k, int) or k < 1:
            raise ApiError("parse_error", f"k must be a positive integer, got {k!r}", 422, locus="k")
        try:
            query = compile_query(
                script, query_data.get("fixed"), query_data.get("variable")
            )
            groups = match(
                script, query, state.catalog, k=k, weights=state.config.score_weights()
            )
        except QueryError as exc:
            raise ApiError("parse_error", str(exc), 422, locus="query")
        except NoMatch:
            return {"groups": []}
        state.groups[script_id] = {g.group_id: g for g in groups}
        return {
            "groups": [
                {
                    "group_id": g.group_id,
                    "scene_key": g.scene_key,
                    "mean_score": g.mean_score(),
                    "establishing": _shot_summary(g.establishing),
                    "frames": [_shot_summary(s) for s in g.dialogue_frames],
                }
                for g in groups
            ]
        }

    @app.post("/sessions")
    def post_session(payload: dict):
        script_id = _require(payload, "script_id")
        group_id = _require(payload, "group_id")
        script = _get_script(state, script_id)
        group = state.groups.get(script_id, {}).get(group_id)
        if group is None:
            raise ApiError(
                "not_found", f"unknown group {group_id!r} for {script_id!r}", 404, locus="group_id"
            )
        settings = _parse_settings(state, payload.get("settings"))
        master_seed = payload.get("seed")
        if master_seed is None:
            master_seed = secrets.randbits(64)
        session_id = _session_id_for(script_id, group_id, master_seed, state.sessions)
        try:
            session = create_session(
                script, group, settings, session_id=session_id, master_seed=master_seed
            )
        except MismatchError as exc:
            raise ApiError("conflict", str(exc), 409)
        state.sessions[session.session_id] = session
        state.locks[session.session_id] = threading.Lock()
        return {"session_id": session.session_id}

    @app.post("/sessions/{session_id}/render")
    def post_render(session_id: str, payload: dict | None = None):
        payload = payload or {}
        session = _get_session(state, session_id)
        with state.locks[session_id]:
            report = render_all(
                session,
                state.backend,
                state.store,
                state.schema,
                user_prompt=payload.get("user_prompt"),
                force=bool(payload.get("force", False)),
                width=state.config.width,
                height=state.config.height,
            )
        return {"statuses": report.statuses, "ok": report.ok}

    @app.post("/sessions/{session_id}/pins")
    def post_pins(session_id: str, payload: dict):
        session = _get_session(state, session_id)
        frame_ids = _require(payload, "frame_ids")
        pinned = payload.get("pinned", True)
        with state.locks[session_id]:
            try:
                if pinned:
                    pin(session, frame_ids)
                else:
                    unpin(session, frame_ids)
            except UnknownFrame as exc:
                raise ApiError("not_found", str(exc), 404, locus="frame_ids")
        return {
            "pins": {f.frame_id: f.pinned for f in session.frames},
        }

    @app.post("/sessions/{session_id}/reshot")
    def post_reshot(session_id: str, payload: dict | None = None):
        payload = payload or {}
        session = _get_session(state, session_id)
        settings = (
            _parse_settings(state, payload["settings"])
            if payload.get("settings") is not None
            else session.settings
        )
        with state.locks[session_id]:
            try:
                report = reshot(
                    session,
                    settings,
                    state.backend,
                    state.store,
                    state.schema,
                    user_prompt=payload.get("user_prompt"),
                    seed_lock=bool(payload.get("seed_lock", False)),
                    width=state.config.width,
                    height=state.config.height,
                )
            except NoPinnedFrames as exc:
                raise ApiError("conflict", str(exc), 409)
        return {"statuses": report.statuses, "ok": report.ok}

    @app.get("/sessions/{session_id}/board")
    def get_board(session_id: str):
        return _board(state, _get_session(state, session_id))

    @app.get("/sessions/{session_id}/manifest")
    def get_manifest(session_id: str):
        return export_manifest(_get_session(state, session_id))

    @app.get("/images/{digest}")
    def get_image(digest: str):
        digest = digest.removesuffix(".png")
        try:
            data = state.store.get(digest)
        except (MissingImage, IntegrityError) as exc:
            raise ApiError("not_found", str(exc), 404)
        return Response(content=data, media_type="image/png")

    return app


def _map_error(exc: PrevizError) -> ApiError:
    if isinstance(exc, ParseError):
        return ApiError("parse_error", exc.reason, 422, locus=f"line {exc.line_no}")
    if isinstance(exc, QueryError):
        return ApiError("parse_error", str(exc), 422)
    if isinstance(exc, (UnknownStyle,)):
        return ApiError("unknown_style", str(exc), 422)
    if isinstance(exc, SelectionError):
        if exc.category == "director_style":
            return ApiError("unknown_style", str(exc), 422, locus=exc.category)
        return ApiError("parse_error", str(exc), 422, locus=exc.category)
    if isinstance(exc, (NotFound, MissingImage)):
        return ApiError("not_found", str(exc), 404)
    if isinstance(exc, (NoPinnedFrames, MismatchError)):
        return ApiError("conflict", str(exc), 409)
    if isinstance(exc, (BackendError, BackendTimeout)):
        return ApiError("backend_error", str(exc), 502)
    if isinstance(exc, NoMatch):
        return ApiError("no_match", str(exc), 404)
    return ApiError("backend_error", str(exc), 500)
