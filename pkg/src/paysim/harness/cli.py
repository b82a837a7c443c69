"""``paysim run | check | digest``.

Exit codes: 0 success, 1 failed expectation or digest mismatch, 2 usage or
parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dsl import ScenarioError, parse_scenario
from .runner import RunError, render_text, render_transcript, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    text = _read(args.file)
    try:
        script = parse_scenario(text)
    except ScenarioError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    render = render_transcript if args.format == "json" else render_text
    try:
        transcript = run_scenario(text, seed=args.seed)
    except RunError as exc:
        if exc.transcript is not None:
            _emit(render(exc.transcript), args.out)
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(render(transcript), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        script = parse_scenario(_read(args.file))
    except ScenarioError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{args.file}: ok ({len(script.actors)} actors, {len(script.steps)} steps)")
    return EXIT_OK


def cmd_digest(args) -> int:
    raw = _read(args.transcript)
    try:
        stored = json.loads(raw)
        header = stored["header"]
        claimed = stored["final_digest"]
        replayed = run_scenario(header["script"], seed=header["seed"])
    except (ValueError, KeyError, TypeError, ScenarioError) as exc:
        print(f"{args.transcript}: corrupt transcript ({exc})", file=sys.stderr)
        return EXIT_FAIL
    except RunError as exc:
        replayed = exc.transcript or {}
    if replayed.get("final_digest") != claimed:
        print(f"mismatch: transcript claims {claimed}, replay gives {replayed.get('final_digest')}")
        return EXIT_FAIL
    if render_transcript(replayed) != raw:
        print(f"mismatch: digest {claimed} matches but transcript body differs from replay")
        return EXIT_FAIL
    print(f"ok {claimed}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paysim", description="Run blockchain payment scenarios deterministically.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="execute a scenario and print its transcript")
    run.add_argument("file")
    run.add_argument("--seed", type=int, default=None, help="override the script's seed")
    run.add_argument("--out", default=None, help="write the transcript here instead of stdout")
    run.add_argument("--format", choices=("json", "text"), default="json")
    run.set_defaults(func=cmd_run)
    check = sub.add_parser("check", help="parse a scenario without running it")
    check.add_argument("file")
    check.set_defaults(func=cmd_check)
    digest = sub.add_parser("digest", help="replay a JSON transcript and compare its final digest")
    digest.add_argument("transcript")
    digest.set_defaults(func=cmd_digest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
