"""Live storyboard session: frames, pins, reshot-only-pinned, and manifests.

A session holds one establishing frame (line_index -1) plus one frame per
dialogue line, each with a linear revision history. Reshot regenerates
only the pinned frames with the latest settings; revision 1 of every
frame is always retained for side-by-side comparison.
"""

from __future__ import annotations

import json
import secrets
import uuid
import hashlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .errors import PrevizError
from .generation import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    BackendError,
    BackendTimeout,
    GenerationRequest,
)
from .prompting import MenuSchema, PromptSpec, compose, serialize_prompt, spec_from_dict, spec_to_dict
from .retrieval import ShotGroup, group_from_dict, group_to_dict
from .screenplay import Script, script_from_dict, script_to_dict
from .store import ImageStore, IntegrityError, MissingImage

MANIFEST_VERSION = 1

ESTABLISHING_INDEX = -1


class MismatchError(PrevizError):
    pass


class UnknownFrame(PrevizError):
    pass


class NoPinnedFrames(PrevizError):
    pass


class ManifestVersionError(PrevizError):
    pass


Clock = Callable[[], str]


def system_clock() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def fixed_clock(instant: str = "1970-01-01T00:00:00+00:00") -> Clock:
    """Clock for reproducible batch runs; the live service uses real time."""
    return lambda: instant


def derive_seed(master_seed: int, frame_id: str, revision_no: int) -> int:
    digest = hashlib.blake2b(
        f"{master_seed}:{frame_id}:{revision_no}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


@dataclass
class Revision:
    revision_no: int
    request: GenerationRequest
    image_hash: str


@dataclass
class Frame:
    frame_id: str
    line_index: int  # -1 for the establishing frame
    source_shot_id: str
    revisions: list[Revision] = field(default_factory=list)
    pinned: bool = False

    @property
    def latest(self) -> Revision | None:
        return self.revisions[-1] if self.revisions else None

    @property
    def original(self) -> Revision | None:
        return self.revisions[0] if self.revisions else None


@dataclass
class Session:
    session_id: str
    script: Script
    group: ShotGroup
    frames: list[Frame]
    settings: PromptSpec
    master_seed: int
    created_at: str
    updated_at: str

    def frame(self, frame_id: str) -> Frame:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise UnknownFrame(f"unknown frame {frame_id!r}")

    def source_uri(self, frame: Frame) -> str:
        """Image URI of the frame's reference shot in the chosen group."""
        position = self.frames.index(frame)
        member = self.group.members()[position]
        return member.record.image_uri


@dataclass
class RenderReport:
    statuses: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(not s.startswith("failed") for s in self.statuses.values())


def create_session(
    script: Script,
    group: ShotGroup,
    settings: PromptSpec,
    session_id: str | None = None,
    master_seed: int | None = None,
    clock: Clock = system_clock,
) -> Session:
    """One frame per group member, no revisions yet, nothing pinned."""
    if len(group.dialogue_frames) != len(script.lines):
        raise MismatchError(
            f"group has {len(group.dialogue_frames)} dialogue frames "
            f"for {len(script.lines)} script lines"
        )
    if session_id is None:
        session_id = uuid.uuid4().hex
    if master_seed is None:
        master_seed = secrets.randbits(64)
    frames = [
        Frame(
            frame_id="frame_00",
            line_index=ESTABLISHING_INDEX,
            source_shot_id=group.establishing.record.shot_id,
        )
    ]
    for i, shot in enumerate(group.dialogue_frames):
        frames.append(
            Frame(
                frame_id=f"frame_{i + 1:02d}",
                line_index=i,
                source_shot_id=shot.record.shot_id,
            )
        )
    now = clock()
    return Session(
        session_id=session_id,
        script=script,
        group=group,
        frames=frames,
        settings=settings,
        master_seed=master_seed,
        created_at=now,
        updated_at=now,
    )


def _render_frame(
    session: Session,
    frame: Frame,
    backend,
    store: ImageStore,
    schema: MenuSchema,
    settings: PromptSpec,
    user_prompt: str | None,
    seed: int,
    width: int,
    height: int,
) -> str:
    revision_no = len(frame.revisions) + 1
    request = GenerationRequest(
        request_id=f"{session.session_id}:{frame.frame_id}:r{revision_no}",
        base_image_uri=session.source_uri(frame),
        prompt=serialize_prompt(compose(settings, schema)),
        user_prompt=user_prompt,
        seed=seed,
        width=width,
        height=height,
    )
    try:
        result = backend.generate(request)
    except (BackendError, BackendTimeout) as exc:
        return f"failed: {exc}"
    digest = store.put(result.image_bytes)
    frame.revisions.append(Revision(revision_no=revision_no, request=request, image_hash=digest))
    return "rendered"


def render_all(
    session: Session,
    backend,
    store: ImageStore,
    schema: MenuSchema,
    user_prompt: str | None = None,
    force: bool = False,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    clock: Clock = system_clock,
) -> RenderReport:
    """Give every frame revision 1. A second call is a no-op unless forced.

    Backend failures are reported per frame; successful revisions stay.
    """
    report = RenderReport()
    if not force and any(f.revisions for f in session.frames):
        report.statuses = {f.frame_id: "skipped" for f in session.frames}
        return report
    for frame in session.frames:
        seed = derive_seed(session.master_seed, frame.frame_id, len(frame.revisions) + 1)
        report.statuses[frame.frame_id] = _render_frame(
            session, frame, backend, store, schema, session.settings, user_prompt, seed,
            width, height,
        )
    session.updated_at = clock()
    return report


def pin(session: Session, frame_ids: list[str], clock: Clock = system_clock) -> None:
    for frame_id in frame_ids:
        session.frame(frame_id).pinned = True
    session.updated_at = clock()


def unpin(session: Session, frame_ids: list[str], clock: Clock = system_clock) -> None:
    for frame_id in frame_ids:
        session.frame(frame_id).pinned = False
    session.updated_at = clock()


def reshot(
    session: Session,
    new_settings: PromptSpec,
    backend,
    store: ImageStore,
    schema: MenuSchema,
    user_prompt: str | None = None,
    seed_lock: bool = False,
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    clock: Clock = system_clock,
) -> RenderReport:
    """Regenerate only the pinned frames with the latest settings.

    Unpinned frames are untouched; every frame keeps its revision 1. By
    default each new revision draws a fresh derived seed; seed_lock reuses
    the frame's previous seed for pure settings comparisons.
    """
    pinned = [f for f in session.frames if f.pinned]
    if not pinned:
        raise NoPinnedFrames("reshot requires at least one pinned frame")
    session.settings = new_settings
    report = RenderReport()
    for frame in pinned:
        revision_no = len(frame.revisions) + 1
        if seed_lock and frame.latest is not None:
            seed = frame.latest.request.seed
        else:
            seed = derive_seed(session.master_seed, frame.frame_id, revision_no)
        report.statuses[frame.frame_id] = _render_frame(
            session, frame, backend, store, schema, new_settings, user_prompt, seed,
            width, height,
        )
    session.updated_at = clock()
    return report


def export_manifest(session: Session) -> dict:
    """JSON-ready manifest; reconstructs an equal session via import_manifest."""
    lines_by_index = {line.index: line for line in session.script.lines}
    frames = []
    for frame in session.frames:
        line = lines_by_index.get(frame.line_index)
        frames.append(
            {
                "frame_id": frame.frame_id,
                "line_index": frame.line_index,
                "speaker": line.speaker if line else None,
                "text": line.text if line else None,
                "source_shot_id": frame.source_shot_id,
                "pinned": frame.pinned,
                "revisions": [
                    {
                        "revision_no": r.revision_no,
                        "request": r.request.to_dict(),
                        "image": r.image_hash,
                    }
                    for r in frame.revisions
                ],
            }
        )
    return {
        "manifest_version": MANIFEST_VERSION,
        "session": {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "updated_at": session.updated_at,
            "master_seed": session.master_seed,
            "script": script_to_dict(session.script),
            "group": group_to_dict(session.group),
            "settings": spec_to_dict(session.settings),
            "frames": frames,
        },
    }


def import_manifest(data: dict | bytes | str, store: ImageStore | None = None) -> Session:
    """Rebuild a session from manifest JSON, verifying image hashes when a store is given."""
    if isinstance(data, (bytes, str)):
        data = json.loads(data)
    version = data.get("manifest_version")
    if version != MANIFEST_VERSION:
        raise ManifestVersionError(f"unsupported manifest_version {version!r}")
    body = data["session"]
    frames = []
    for fdata in body["frames"]:
        revisions = [
            Revision(
                revision_no=r["revision_no"],
                request=GenerationRequest.from_dict(r["request"]),
                image_hash=r["image"],
            )
            for r in fdata["revisions"]
        ]
        frames.append(
            Frame(
                frame_id=fdata["frame_id"],
                line_index=fdata["line_index"],
                source_shot_id=fdata["source_shot_id"],
                revisions=revisions,
                pinned=fdata["pinned"],
            )
        )
    if store is not None:
        for frame in frames:
            for revision in frame.revisions:
                try:
                    store.get(revision.image_hash)
                except MissingImage as exc:
                    raise IntegrityError(str(exc)) from exc
    return Session(
        session_id=body["session_id"],
        script=script_from_dict(body["script"]),
        group=group_from_dict(body["group"]),
        frames=frames,
        settings=spec_from_dict(body["settings"]),
        master_seed=body["master_seed"],
        created_at=body["created_at"],
        updated_at=body["updated_at"],
    )


def manifest_bytes(manifest: dict) -> bytes:
    return (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8")


def save_session(session: Session, out_dir: str | Path, store: ImageStore) -> Path:
    """Write manifest.json with the referenced images as sibling .png files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dest = ImageStore(out)
    for frame in session.frames:
        for revision in frame.revisions:
            if revision.image_hash not in dest:
                dest.put(store.get(revision.image_hash))
    manifest_path = out / "manifest.json"
    manifest_path.write_bytes(manifest_bytes(export_manifest(session)))
    return manifest_path


def load_session(directory: str | Path, verify: bool = True) -> Session:
    directory = Path(directory)
    data = (directory / "manifest.json").read_bytes()
    store = ImageStore(directory) if verify else None
    return import_manifest(data, store)
