"""Trace data model, the field-mapped diff, and the cross-engine report.

A trace is one row per round with every observable field.  Rows from the
operational engine and the requirements engine share this schema, so the
equivalence check reduces to a per-round field comparison (after applying
a field map that explodes any composite packet column into the three split
columns, and dropping ignored fields).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .fsm import Violation
from .specio import SpecDocument


@dataclass(frozen=True)
class TraceRow:
    round: int
    state: str
    event: str
    command: str
    packet_addr: str | None
    packet_cmd: str | None
    packet_data: str | None
    bytes_sent: int
    bytes_received: int
    tx_cnt: int
    tx_finish: bool
    rx_finish: bool
    cmd_finish: bool
    # requirement ids per changed field; empty on the operational side
    attribution: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def values(self) -> dict[str, object]:
        return {
            "round": self.round,
            "state": self.state,
            "event": self.event,
            "command": self.command,
            "packet_addr": self.packet_addr,
            "packet_cmd": self.packet_cmd,
            "packet_data": self.packet_data,
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "tx_cnt": self.tx_cnt,
            "tx_finish": self.tx_finish,
            "rx_finish": self.rx_finish,
            "cmd_finish": self.cmd_finish,
        }


@dataclass(frozen=True)
class Trace:
    rows: tuple[TraceRow, ...]
    command: str
    engine: str                      # "ops" or "reqs"
    reason: str                      # "cmd_finish", "error", "stop" or "budget"
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class DiffEntry:
    round: int
    field: str
    left: object
    right: object


@dataclass(frozen=True)
class FieldMap:
    """Mapping from composite columns to their split component columns."""

    pairs: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def apply(self, row: dict[str, object]) -> dict[str, object]:
        out = dict(row)
        for composite, components in self.pairs.items():
            if composite in out:
                value = out.pop(composite)
                parts = tuple(value) if isinstance(value, (tuple, list)) else (value,)
                for name, part in zip(components, parts):
                    out.setdefault(name, part)
        return out


PACKET_FIELD_MAP = FieldMap({"packet": ("packet_addr", "packet_cmd", "packet_data")})

# The flag columns the source comparison left out of the operational traces.
DEFAULT_IGNORE = frozenset({"tx_finish", "rx_finish"})


def _rows_as_dicts(trace) -> list[dict[str, object]]:
    if isinstance(trace, Trace):
        rows: Sequence = trace.rows
    else:
        rows = trace
    out = []
    for row in rows:
        out.append(row.values() if isinstance(row, TraceRow) else dict(row))
    return out


def diff(a, b, field_map: FieldMap | None = None,
         ignore: Iterable[str] = ()) -> list[DiffEntry]:
    """Field-by-field comparison of two traces.

    ``a`` and ``b`` may be :class:`Trace` objects, row lists or dict lists.
    Attribution is never compared.  A length mismatch yields one synthetic
    entry on field ``length``; the common prefix is still compared.
    """
    fm = field_map or FieldMap()
    skip = set(ignore) | {"attribution"}
    rows_a = [fm.apply(r) for r in _rows_as_dicts(a)]
    rows_b = [fm.apply(r) for r in _rows_as_dicts(b)]

    entries: list[DiffEntry] = []
    if len(rows_a) != len(rows_b):
        entries.append(DiffEntry(round=min(len(rows_a), len(rows_b)), field="length",
                                 left=len(rows_a), right=len(rows_b)))
    for i, (ra, rb) in enumerate(zip(rows_a, rows_b)):
        for name in sorted((set(ra) | set(rb)) - skip):
            left = ra.get(name)
            right = rb.get(name)
            if left != right:
                entries.append(DiffEntry(round=i, field=name, left=left, right=right))
    return entries


def trace_all(spec: SpecDocument, engine: str, max_rounds: int) -> dict[str, Trace]:
    """One trace per roster command, via the requested engine."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    if engine == "ops":
        from .opmodel import run

        return {cmd: run(spec, cmd, max_rounds) for cmd in spec.roster.command_names}
    if engine == "reqs":
        from .generate import generate_model
        from .reqs.engine import run_requirements_trace

        model, _ = generate_model(spec)
        return {
            cmd: run_requirements_trace(model, cmd, max_rounds)
            for cmd in spec.roster.command_names
        }
    raise ValueError(f"unknown engine {engine!r} (expected 'ops' or 'reqs')")


@dataclass(frozen=True)
class EquivalenceReport:
    per_command: Mapping[str, tuple[DiffEntry, ...]]
    max_rounds: int

    @property
    def passed(self) -> bool:
        return all(not entries for entries in self.per_command.values())

    def render_markdown(self) -> str:
        lines = ["# Trace equivalence report", ""]
        lines.append(f"Commands compared: {len(self.per_command)}  "
                     f"(round budget {self.max_rounds})")
        lines.append("")
        for cmd in sorted(self.per_command):
            entries = self.per_command[cmd]
            status = "PASS" if not entries else f"FAIL ({len(entries)} differences)"
            lines.append(f"- `{cmd}`: {status}")
            for e in entries:
                lines.append(f"    - round {e.round}, {e.field}: "
                             f"ops={e.left!r} reqs={e.right!r}")
        lines.append("")
        lines.append(f"Overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def render_json(self) -> str:
        payload = {
            "max_rounds": self.max_rounds,
            "passed": self.passed,
            "commands": {
                cmd: [
                    {"round": e.round, "field": e.field,
                     "left": e.left, "right": e.right}
                    for e in entries
                ]
                for cmd, entries in sorted(self.per_command.items())
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def equivalence_report(spec: SpecDocument, max_rounds: int = 500) -> EquivalenceReport:
    """Run both engines for every command and diff each pair of traces."""
    ops_traces = trace_all(spec, "ops", max_rounds)
    reqs_traces = trace_all(spec, "reqs", max_rounds)
    per_command = {
        cmd: tuple(diff(ops_traces[cmd], reqs_traces[cmd],
                        field_map=PACKET_FIELD_MAP, ignore=DEFAULT_IGNORE))
        for cmd in spec.roster.command_names
    }
    return EquivalenceReport(per_command=per_command, max_rounds=max_rounds)
