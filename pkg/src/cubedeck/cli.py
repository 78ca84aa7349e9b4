"""Command-line harness: replay, generate, verify, print-defaults, serve.

Exit codes: 0 clean; 1 verification mismatch; 2 malformed trace or unknown
scenario; 3 unresolvable dataset, rulebook, or golden file.
"""

from __future__ import annotations

import argparse
import difflib
import sys
from typing import List, Optional

from . import scenarios
from .errors import CubedeckError, ResolutionError, RulebookError, SchemaError, TraceFormatError
from .recognizer import RecognizerParams
from .rulebook import builtin_rulebook
from .spatial import SpatialParams
from .trace import BUILTIN_DATASETS, BUILTIN_RULEBOOKS, parse_trace, replay_trace


def _read(path: str) -> str:
    with open(path, "r") as fh:
        return fh.read()


def _load_trace(path: str):
    try:
        text = _read(path)
    except OSError as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        raise SystemExit(3)
    try:
        return parse_trace(text)
    except TraceFormatError as exc:
        print(f"error: malformed trace: {exc}", file=sys.stderr)
        raise SystemExit(2)


def _replay(trace, args, sink) -> str:
    try:
        result = replay_trace(
            trace,
            dataset_ref=args.dataset,
            rulebook_ref=args.rulebook,
            search_dir=args.catalog_dir,
            sink=sink,
        )
    except (ResolutionError, SchemaError, RulebookError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(3)
    except CubedeckError as exc:
        print(f"error: replay failed: {exc}", file=sys.stderr)
        raise SystemExit(2)
    return result.snapshot


def cmd_replay(args) -> int:
    trace = _load_trace(args.trace)
    snapshot = _replay(trace, args, sink=lambda line: print(line))
    if args.snapshot_out:
        with open(args.snapshot_out, "w") as fh:
            fh.write(snapshot)
    else:
        sys.stdout.write(snapshot)
    return 0


def cmd_generate(args) -> int:
    try:
        trace = scenarios.generate(args.scenario, args.seed)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    text = trace.to_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    trace = _load_trace(args.trace)
    try:
        golden = _read(args.golden)
    except OSError as exc:
        print(f"error: cannot read golden: {exc}", file=sys.stderr)
        return 3
    snapshot = _replay(trace, args, sink=None)
    if snapshot == golden:
        print("verify: OK")
        return 0
    diff = difflib.unified_diff(
        golden.splitlines(), snapshot.splitlines(), "golden", "replay", lineterm=""
    )
    for line in diff:
        print(line)
    return 1


def cmd_print_defaults(args) -> int:
    print("# recognizer and spatial defaults")
    for line in RecognizerParams().to_lines():
        print(line)
    for line in SpatialParams().to_lines():
        print(line)
    print(f"# built-in datasets: {', '.join(BUILTIN_DATASETS)}")
    print(f"# built-in rulebooks: {', '.join(BUILTIN_RULEBOOKS)}")
    for name in BUILTIN_RULEBOOKS:
        print()
        sys.stdout.write(builtin_rulebook(name).to_text())
    return 0


def cmd_serve(args) -> int:
    from .bridge import serve_forever

    serve_forever(
        host=args.host,
        port=args.port,
        catalog_dir=args.catalog_dir,
        record_dir=args.record_dir,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cubedeck",
        description="Replay, generate, and verify tangible-cube interaction traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--dataset", help="dataset name or path override")
        p.add_argument("--rulebook", help="rulebook name or path override")
        p.add_argument("--catalog-dir", help="directory searched for datasets/rulebooks")

    p = sub.add_parser("replay", help="replay a trace, streaming step reports")
    p.add_argument("trace")
    p.add_argument("--snapshot-out", help="write the final snapshot here instead of stdout")
    common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("generate", help="emit a deterministic scenario trace")
    p.add_argument("scenario", help=f"one of: {', '.join(scenarios.SCENARIOS)}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (stdout by default)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="replay a trace and compare against a golden snapshot")
    p.add_argument("trace")
    p.add_argument("golden")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("print-defaults", help="show parameter defaults and built-in rulebooks")
    p.set_defaults(func=cmd_print_defaults)

    p = sub.add_parser("serve", help="run the live session bridge")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--catalog-dir", help="directory searched for datasets/rulebooks")
    p.add_argument("--record-dir", default=".", help="where recorded traces are written")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
