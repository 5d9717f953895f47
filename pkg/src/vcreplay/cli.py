"""Command-line front end: run -> replay -> analyze.

Exit codes from `run` encode the outcome (0 main exited, 2 deadlock,
3 send-on-closed panic, 1 usage/parse errors) so shell harnesses can drive
whole corpora.  `VCREPLAY_MAX_STEPS` caps interpreter steps (default
100000).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import analysis, interp, lang
from .replay import Mode, enumerate_annotations, replay
from .trace import TraceFormatError, read_trace, validate, write_trace

DEFAULT_ENUM_LIMIT = 256


def _load_schedule(args) -> interp.Schedule:
    if args.schedule:
        doc = json.loads(Path(args.schedule).read_text())
        if "moves" in doc:
            return interp.Schedule.explicit(doc["moves"])
        if "seed" in doc:
            return interp.Schedule.seeded(int(doc["seed"]))
        raise ValueError(f"{args.schedule}: schedule needs a 'seed' or 'moves' key")
    return interp.Schedule.seeded(args.seed if args.seed is not None else 0)


def cmd_run(args) -> int:
    try:
        source = Path(args.program).read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        program = lang.parse(source)
        schedule = _load_schedule(args)
        outcome = interp.run(program, schedule)
    except (lang.ParseError, interp.InterpreterError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    data = write_trace(outcome.trace)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data + b"\n")
    print(f"status: {outcome.status.value}", file=sys.stderr)
    if outcome.status is interp.RunStatus.DEADLOCK:
        return 2
    if outcome.status is interp.RunStatus.PANIC_SEND_CLOSED:
        tid, pc = outcome.panic_location
        print(f"send on closed channel in thread {tid} at pc {pc}", file=sys.stderr)
        return 3
    return 0


def _load_trace(path: str):
    data = Path(path).read_bytes()
    ts = read_trace(data)
    problems = validate(ts)
    if problems:
        raise TraceFormatError("; ".join(str(p) for p in problems[:5]))
    return ts


def _mode(args) -> Mode:
    if args.mode == "naive":
        return Mode.naive(args.seed if args.seed is not None else 0)
    if args.mode == "backtrack":
        return Mode.backtrack()
    return Mode.strategy()


def cmd_replay(args) -> int:
    try:
        ts = _load_trace(args.trace)
    except (OSError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = replay(ts, _mode(args))
    if result.truncated:
        print("warning: backtracking limit exceeded, partial result", file=sys.stderr)
    doc = {"terminal": result.terminal.kind, "events": result.events_json()}
    if args.all_schedules is not None:
        enum = enumerate_annotations(ts, limit=args.all_schedules)
        doc["enumeration"] = {"count": enum.count, "truncated": enum.truncated}
        print(f"{enum.count} distinct annotations" + (" (truncated)" if enum.truncated else ""))
    print(f"terminal: {result.terminal.kind}")
    payload = json.dumps(doc, separators=(",", ":"))
    if args.out:
        Path(args.out).write_text(payload)
    else:
        print(payload)
    return 0


def cmd_analyze(args) -> int:
    try:
        ts = _load_trace(args.trace)
    except (OSError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    selected = tuple(s for s in analysis.ALL_SCENARIOS if getattr(args, s))
    if not selected:
        selected = analysis.ALL_SCENARIOS
    result = replay(ts, _mode(args))
    enumerated = None
    if args.all_schedules is not None:
        enum = enumerate_annotations(ts, limit=args.all_schedules)
        enumerated = enum.results
    report = analysis.build_report(ts, result, selected, enumerated=enumerated)
    payload = json.dumps(report.to_json(), separators=(",", ":")) if args.format == "json" else report.render_text()
    if args.out:
        Path(args.out).write_text(payload + "\n")
    else:
        print(payload)
    if args.figures:
        from .figures import render_figures

        for path in render_figures(report, result, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vcreplay",
        description="Run message-passing programs under controlled schedules, "
        "replay their traces into vector-clock annotations, and analyze them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a program and record its trace")
    p_run.add_argument("program", help="program file (.mp)")
    p_run.add_argument("--seed", type=int, default=None, help="seeded scheduler (default 0)")
    p_run.add_argument("--schedule", help="schedule file (JSON with 'seed' or 'moves')")
    p_run.add_argument("--out", help="trace output path (default stdout)")
    p_run.set_defaults(func=cmd_run)

    def common_replay_args(p):
        p.add_argument("--mode", choices=["strategy", "naive", "backtrack"], default="strategy")
        p.add_argument("--seed", type=int, default=None, help="seed for --mode naive")
        p.add_argument(
            "--all-schedules",
            nargs="?",
            const=DEFAULT_ENUM_LIMIT,
            type=int,
            default=None,
            metavar="N",
            help=f"enumerate distinct annotations (limit, default {DEFAULT_ENUM_LIMIT})",
        )
        p.add_argument("--out", help="output path (default stdout)")

    p_replay = sub.add_parser("replay", help="annotate a recorded trace with vector clocks")
    p_replay.add_argument("trace", help="trace file")
    common_replay_args(p_replay)
    p_replay.set_defaults(func=cmd_replay)

    p_an = sub.add_parser("analyze", help="run the analysis scenarios over a trace")
    p_an.add_argument("trace", help="trace file")
    for scenario in analysis.ALL_SCENARIOS:
        p_an.add_argument(f"--{scenario}", action="store_true", help=f"select the {scenario} scenario")
    p_an.add_argument("--format", choices=["text", "json"], default="text")
    p_an.add_argument("--figures", metavar="DIR", help="also render figures and findings.csv into DIR")
    common_replay_args(p_an)
    p_an.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
