"""Command line interface.

Subcommands:
  run          parse a script, match the catalog, render one storyboard
  serve        start the REST service
  stub-server  start the standalone HTTP generation stub

``run`` is fully deterministic under the mock backend: timestamps come
from a fixed clock and the session id is derived from the inputs, so two
runs with the same arguments produce byte-identical output trees.

Exit codes: 0 success, 1 invalid input or render failure, 2 missing
file or group, 3 no catalog scene matched the query.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .catalog import FormatError, NotFound, load_catalog
from .config import Config, load_config
from .errors import PrevizError
from .generation import DEFAULT_HEIGHT, DEFAULT_WIDTH, HttpBackend, MockBackend
from .prompting import PresetError, build_schema, load_presets, select
from .retrieval import NoMatch, QueryError, compile_query, match
from .screenplay import ParseError, parse_script
from .session import create_session, fixed_clock, render_all, save_session
from .store import ImageStore

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_FOUND = 2
EXIT_NO_MATCH = 3


def _read_json_arg(value: str | None, flag: str) -> dict:
    """Parse an inline JSON object; an @path value reads the file instead."""
    if not value:
        return {}
    if value.startswith("@"):
        path = Path(value[1:])
        if not path.exists():
            raise FileNotFoundError(f"{flag}: no such file {path}")
        value = path.read_text(encoding="utf-8")
    data = json.loads(value)
    if not isinstance(data, dict):
        raise ValueError(f"{flag}: expected a JSON object")
    return data


def _build_backend(args: argparse.Namespace):
    if args.backend == "mock":
        return MockBackend()
    return HttpBackend(args.url)


def _session_id(script_text: str, group_id: str, seed: int) -> str:
    basis = f"{script_text}\x00{group_id}\x00{seed}"
    return "session-" + hashlib.blake2b(basis.encode("utf-8"), digest_size=6).hexdigest()


def cmd_run(args: argparse.Namespace) -> int:
    script_text = Path(args.script).read_text(encoding="utf-8")
    script = parse_script(script_text)
    catalog, _ = load_catalog(args.catalog)
    library = load_presets(args.presets)
    schema = build_schema(library)

    query_data = _read_json_arg(args.query, "--query")
    settings_data = _read_json_arg(args.settings, "--settings")
    query = compile_query(script, query_data.get("fixed"), query_data.get("variable"))
    groups = match(script, query, catalog, k=args.k)
    if args.group >= len(groups):
        print(
            f"error: group index {args.group} out of range ({len(groups)} matched)",
            file=sys.stderr,
        )
        return EXIT_NOT_FOUND
    group = groups[args.group]

    settings = select(
        schema, library, settings_data.get("selections", {}),
        settings_data.get("character_overrides"),
    )
    clock = fixed_clock()
    session = create_session(
        script,
        group,
        settings,
        session_id=_session_id(script_text, group.group_id, args.seed),
        master_seed=args.seed,
        clock=clock,
    )
    out = Path(args.out)
    store = ImageStore(out)
    report = render_all(
        session,
        _build_backend(args),
        store,
        schema,
        user_prompt=args.user_prompt,
        width=args.width,
        height=args.height,
        clock=clock,
    )
    manifest_path = save_session(session, out, store)
    for frame in session.frames:
        status = report.statuses[frame.frame_id]
        image = frame.latest.image_hash if frame.latest else "-"
        print(f"{frame.frame_id}  {status}  {image}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    if args.config:
        config = load_config(args.config)
    else:
        config = Config(backend_kind=args.backend, backend_url=args.url, k=args.k)
    catalog, _ = load_catalog(args.catalog)
    library = load_presets(args.presets)
    schema = build_schema(library)
    app = create_app(
        catalog=catalog,
        library=library,
        schema=schema,
        backend=config.make_backend(),
        store=ImageStore(args.store),
        config=config,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def cmd_stub_server(args: argparse.Namespace) -> int:
    import uvicorn

    from .stub_server import create_stub_app

    uvicorn.run(create_stub_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="previz", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="render one storyboard from a script and catalog")
    run.add_argument("--script", required=True, help="screenplay text file")
    run.add_argument("--catalog", required=True, help="shot catalog (.jsonl)")
    run.add_argument("--presets", default=None, help="preset library JSON (default: bundled)")
    run.add_argument("--out", required=True, help="output directory for manifest and images")
    run.add_argument("--query", default=None, help="JSON query object, or @file")
    run.add_argument("--settings", default=None, help="JSON menu selections, or @file")
    run.add_argument("--backend", choices=["mock", "http"], default="mock")
    run.add_argument("--url", default="http://127.0.0.1:8085", help="http backend base URL")
    run.add_argument("--k", type=int, default=3, help="number of candidate groups to rank")
    run.add_argument("--group", type=int, default=0, help="index of the ranked group to render")
    run.add_argument("--seed", type=int, default=0, help="master seed for frame seed derivation")
    run.add_argument("--user-prompt", default=None, help="free-form text appended per render")
    run.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    run.add_argument("--height", type=int, default=DEFAULT_HEIGHT)
    run.set_defaults(func=cmd_run)

    serve = sub.add_parser("serve", help="start the REST service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--catalog", required=True)
    serve.add_argument("--presets", default=None)
    serve.add_argument("--config", default=None, help="JSON config file")
    serve.add_argument("--store", default="previz-store", help="image store directory")
    serve.add_argument("--backend", choices=["mock", "http"], default="mock")
    serve.add_argument("--url", default="http://127.0.0.1:8085")
    serve.add_argument("--k", type=int, default=3)
    serve.set_defaults(func=cmd_serve)

    stub = sub.add_parser("stub-server", help="start the HTTP generation stub")
    stub.add_argument("--host", default="127.0.0.1")
    stub.add_argument("--port", type=int, default=8085)
    stub.set_defaults(func=cmd_stub_server)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except NotFound as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except NoMatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_MATCH
    except (ParseError, QueryError, PresetError, FormatError, PrevizError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
