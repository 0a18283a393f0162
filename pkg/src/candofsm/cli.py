"""Command line front end: check, simulate, diff, verify, report.

Reports go to stdout, diagnostics to stderr.  Exit codes: 0 success,
1 violations or differences found, 2 parse or load error, 3 usage error.
"""

from __future__ import annotations

import argparse
import enum
import sys
from collections import defaultdict

from . import __version__
from .fsm import (
    FsmError,
    Violation,
    check_cando,
    check_roster,
    check_statemap,
    check_totality,
)
from .generate import (
    generate_model,
    render_requirements_html,
    render_requirements_markdown,
)
from .specio import ParseError, SpecDocument, load_spec, read_trace_csv, write_trace_csv
from .trace import DEFAULT_IGNORE, PACKET_FIELD_MAP, diff, equivalence_report


class ExitStatus(enum.IntEnum):
    OK = 0
    FINDINGS = 1
    LOAD_ERROR = 2
    USAGE = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped onto exit code 3."""

    def error(self, message):
        self.exit(ExitStatus.USAGE, f"{self.prog}: error: {message}\n")


def _load(path: str) -> SpecDocument:
    try:
        return load_spec(path)
    except FileNotFoundError:
        raise _LoadFailure(f"cannot read {path!r}: no such file")
    except OSError as exc:
        raise _LoadFailure(f"cannot read {path!r}: {exc}")
    except ParseError as exc:
        snippet = f"\n  {exc.snippet}" if exc.snippet else ""
        raise _LoadFailure(
            f"{path}:{exc.line}:{exc.column}: {exc.message}{snippet}")


class _LoadFailure(Exception):
    pass


def _all_checks(spec: SpecDocument) -> list[Violation]:
    violations = list(check_roster(spec.roster))
    for ev in spec.roster.event_names:
        if ev in spec.fsm:
            violations.extend(check_statemap(spec.roster, spec.fsm[ev], event=ev))
    violations.extend(check_totality(spec.roster, spec.fsm))
    violations.extend(check_cando(spec.roster, spec.fsm))
    return violations


def _print_violations(violations: list[Violation]) -> None:
    grouped: dict[str, list[Violation]] = defaultdict(list)
    for v in violations:
        grouped[v.constraint_id].append(v)
    for constraint in sorted(grouped, key=lambda c: grouped[c][0].sort_key()):
        print(f"{constraint} ({len(grouped[constraint])}):")
        for v in sorted(grouped[constraint], key=Violation.sort_key):
            where = " ".join(
                part for part in (
                    f"event={v.event}" if v.event else "",
                    f"{v.from_state} -> {v.to_state}" if v.from_state and v.to_state
                    else (v.from_state or ""),
                ) if part)
            print(f"  {where + ': ' if where else ''}{v.message}")


def _cmd_check(args) -> int:
    spec = _load(args.spec)
    violations = _all_checks(spec)
    if violations:
        _print_violations(violations)
        print(f"{len(violations)} violations")
        return ExitStatus.FINDINGS
    print("0 violations")
    return ExitStatus.OK


def _cmd_simulate(args) -> int:
    spec = _load(args.spec)
    if args.command not in spec.roster.command_names:
        print(f"unknown command {args.command!r}", file=sys.stderr)
        return ExitStatus.USAGE
    if args.max_rounds < 1:
        print("--max-rounds must be at least 1", file=sys.stderr)
        return ExitStatus.USAGE
    if args.engine == "ops":
        from .opmodel import run

        trace = run(spec, args.command, args.max_rounds)
    else:
        from .reqs.engine import run_requirements_trace

        model, _ = generate_model(spec)
        trace = run_requirements_trace(model, args.command, args.max_rounds)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(trace.rows, fh)
        print(f"{len(trace.rows)} rows ({trace.reason}) -> {args.out}",
              file=sys.stderr)
    else:
        write_trace_csv(trace.rows, sys.stdout)
    return ExitStatus.OK


def _cmd_diff(args) -> int:
    rows = []
    for path in (args.left, args.right):
        try:
            with open(path, "r", encoding="utf-8", newline="") as fh:
                rows.append(read_trace_csv(fh))
        except OSError as exc:
            print(f"cannot read {path!r}: {exc}", file=sys.stderr)
            return ExitStatus.LOAD_ERROR
        except ParseError as exc:
            print(f"{path}:{exc.line}: {exc.message}", file=sys.stderr)
            return ExitStatus.LOAD_ERROR
    ignore = {f for f in (args.ignore or "").split(",") if f}
    entries = diff(rows[0], rows[1], field_map=PACKET_FIELD_MAP, ignore=ignore)
    for e in entries:
        print(f"round {e.round}, {e.field}: {e.left!r} != {e.right!r}")
    print(f"{len(entries)} differences")
    return ExitStatus.FINDINGS if entries else ExitStatus.OK


def _cmd_verify(args) -> int:
    spec = _load(args.spec)
    violations = _all_checks(spec)
    if violations:
        _print_violations(violations)
        print(f"verify: FAIL ({len(violations)} structural violations)")
        return ExitStatus.FINDINGS
    try:
        _, gen_report = generate_model(spec)
    except FsmError as exc:
        print(f"cannot generate the requirements model: {exc}", file=sys.stderr)
        return ExitStatus.LOAD_ERROR
    report = equivalence_report(spec, max_rounds=args.max_rounds)
    print(gen_report.summary())
    print(report.render_markdown())
    return ExitStatus.OK if report.passed else ExitStatus.FINDINGS


def _cmd_report(args) -> int:
    spec = _load(args.spec)
    try:
        model, _ = generate_model(spec)
    except FsmError as exc:
        print(f"cannot generate the requirements model: {exc}", file=sys.stderr)
        return ExitStatus.LOAD_ERROR
    if args.format == "md":
        sys.stdout.write(render_requirements_markdown(model))
    else:
        sys.stdout.write(render_requirements_html(model))
    return ExitStatus.OK


def build_parser() -> _Parser:
    parser = _Parser(prog="candofsm",
                     description="FSM spec checking, twin-engine simulation and "
                                 "trace equivalence verification")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("check", parents=[], help="run the structural checkers")
    p.add_argument("spec")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("simulate", help="run one command and write the trace CSV")
    p.add_argument("spec")
    p.add_argument("--command", required=True)
    p.add_argument("--engine", choices=("ops", "reqs"), default="ops")
    p.add_argument("--max-rounds", type=int, default=500)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("diff", help="compare two trace CSV files")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--ignore", default=",".join(sorted(DEFAULT_IGNORE)),
                   help="comma-separated fields to exclude")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("verify", help="check, generate and compare both engines "
                                      "for every command")
    p.add_argument("spec")
    p.add_argument("--max-rounds", type=int, default=500)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("report", help="render the generated requirements")
    p.add_argument("spec")
    p.add_argument("--format", choices=("md", "html"), default="md")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except _LoadFailure as exc:
        print(str(exc), file=sys.stderr)
        return ExitStatus.LOAD_ERROR


if __name__ == "__main__":
    sys.exit(main())
