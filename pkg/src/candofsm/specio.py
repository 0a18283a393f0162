"""Reading and writing the textual ``.fsm`` spec format and trace CSV files.

The spec format is line oriented with ``#`` comments::

    states {
      start: control
      send_packet_1: send synthetic
      ...
    }
    events { CONT ... }            # one name per line, optional `synthetic`
    commands { LED_ON_C ... }
    transition CONT start -> get_cmd
    dispatch LED_ON_C -> set_vLED
    packet set_vLED addr=Optrode_addr cmd=nil data=LED_addr

Parsing is purely syntactic; semantic validation is the checkers' job
(:mod:`candofsm.fsm`).  ``serialize_spec`` is the exact inverse on
well-formed documents and emits a deterministic ordering.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Mapping

from .fsm import MemberDef, Roster, StateDef, StateKind

SPEC_EXTENSION = ".fsm"

# Fixed trace CSV header; the interchange format for diffing.
TRACE_COLUMNS = (
    "round", "state", "event", "command",
    "packet_addr", "packet_cmd", "packet_data",
    "bytes_sent", "bytes_received", "tx_cnt",
    "tx_finish", "rx_finish", "cmd_finish",
    "attribution",
)

_KIND_TOKENS = {k.value: k for k in StateKind}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ParseError(Exception):
    """Syntax error with a 1-based position and the offending line."""

    def __init__(self, line: int, column: int, message: str, snippet: str = ""):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet


@dataclass(frozen=True)
class PacketTemplate:
    """Per-creator-state packet fields; any field may be nil (None)."""

    addr: str | None = None
    cmd: str | None = None
    data: str | None = None


@dataclass(frozen=True)
class SpecDocument:
    roster: Roster
    fsm: Mapping[str, Mapping[str, str]]
    dispatch: Mapping[str, str] = field(default_factory=dict)
    packets: Mapping[str, PacketTemplate] = field(default_factory=dict)

    @property
    def initial(self) -> tuple[str, str]:
        """Seed values for a run: the start state and the continue event."""
        return ("start", "CONT")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpecDocument):
            return NotImplemented
        return (
            self.roster == other.roster
            and {e: dict(m) for e, m in self.fsm.items()}
            == {e: dict(m) for e, m in other.fsm.items()}
            and dict(self.dispatch) == dict(other.dispatch)
            and dict(self.packets) == dict(other.packets)
        )


class _Lines:
    """Cursor over logical lines with comments stripped, positions kept."""

    def __init__(self, text: str):
        self.rows: list[tuple[int, str, str]] = []
        for i, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                self.rows.append((i, stripped, raw))
        self.pos = 0

    def peek(self) -> tuple[int, str, str] | None:
        return self.rows[self.pos] if self.pos < len(self.rows) else None

    def take(self) -> tuple[int, str, str]:
        row = self.rows[self.pos]
        self.pos += 1
        return row


def _err(lineno: int, message: str, raw: str = "", column: int = 1) -> ParseError:
    return ParseError(lineno, column, message, raw)


def _check_name(name: str, lineno: int, raw: str) -> str:
    if not _NAME_RE.match(name):
        raise _err(lineno, f"invalid identifier {name!r}", raw, raw.find(name) + 1 if name in raw else 1)
    return name


def _parse_member_lines(lines: _Lines, section: str, with_kind: bool):
    """Consume entries until the closing brace of a roster section."""
    entries = []
    seen: set[str] = set()
    while True:
        row = lines.peek()
        if row is None:
            raise _err(len(lines.rows) and lines.rows[-1][0] or 1,
                       f"unterminated {section} section")
        lineno, text, raw = lines.take()
        if text == "}":
            return entries
        tokens = text.replace(":", " : ").split()
        name = _check_name(tokens[0], lineno, raw)
        if name in seen:
            raise _err(lineno, f"duplicate {section} entry {name!r}", raw)
        seen.add(name)
        rest = tokens[1:]
        synthetic = False
        if with_kind:
            if len(rest) < 2 or rest[0] != ":":
                raise _err(lineno, f"expected '{name}: <kind>'", raw)
            kind_token = rest[1]
            if kind_token not in _KIND_TOKENS:
                raise _err(lineno, f"unknown state kind {kind_token!r}", raw)
            trailer = rest[2:]
            if trailer == ["synthetic"]:
                synthetic = True
            elif trailer:
                raise _err(lineno, f"unexpected tokens {' '.join(trailer)!r}", raw)
            entries.append(StateDef(name, _KIND_TOKENS[kind_token], synthetic))
        else:
            if rest == ["synthetic"]:
                synthetic = True
            elif rest:
                raise _err(lineno, f"unexpected tokens {' '.join(rest)!r}", raw)
            entries.append(MemberDef(name, synthetic))


def parse_spec(text: str) -> SpecDocument:
    """Parse spec text into a :class:`SpecDocument`; raise :class:`ParseError`."""
    lines = _Lines(text)
    if lines.peek() is None:
        raise ParseError(1, 1, "missing states section")

    sections: dict[str, list] = {}
    for section, with_kind in (("states", True), ("events", False), ("commands", False)):
        row = lines.peek()
        if row is None or not row[1].replace(" ", "").startswith(section + "{"):
            lineno = row[0] if row else 1
            raise _err(lineno, f"missing {section} section", row[2] if row else "")
        lineno, text_line, raw = lines.take()
        if text_line.replace(" ", "") != section + "{":
            raise _err(lineno, f"expected '{section} {{'", raw)
        sections[section] = _parse_member_lines(lines, section, with_kind)

    roster = Roster(
        states=tuple(sections["states"]),
        events=tuple(sections["events"]),
        commands=tuple(sections["commands"]),
    )
    state_names = set(roster.state_names)
    event_names = set(roster.event_names)
    command_names = set(roster.command_names)

    fsm: dict[str, dict[str, str]] = {}
    dispatch: dict[str, str] = {}
    packets: dict[str, PacketTemplate] = {}

    while lines.peek() is not None:
        lineno, text_line, raw = lines.take()
        tokens = text_line.split()
        head = tokens[0]
        if head == "transition":
            if len(tokens) != 5 or tokens[3] != "->":
                raise _err(lineno, "expected 'transition EVENT from -> to'", raw)
            ev, frm, to = tokens[1], tokens[2], tokens[4]
            if ev not in event_names:
                raise _err(lineno, f"unknown event {ev!r}", raw)
            if frm not in state_names:
                raise _err(lineno, f"unknown state {frm!r}", raw)
            if to not in state_names:
                raise _err(lineno, f"unknown state {to!r}", raw)
            per = fsm.setdefault(ev, {})
            if frm in per:
                raise _err(lineno, f"duplicate transition for ({ev}, {frm})", raw)
            per[frm] = to
        elif head == "dispatch":
            if len(tokens) != 4 or tokens[2] != "->":
                raise _err(lineno, "expected 'dispatch COMMAND -> state'", raw)
            cmd, to = tokens[1], tokens[3]
            if cmd not in command_names:
                raise _err(lineno, f"unknown command {cmd!r}", raw)
            if to not in state_names:
                raise _err(lineno, f"unknown state {to!r}", raw)
            if cmd in dispatch:
                raise _err(lineno, f"duplicate dispatch for {cmd!r}", raw)
            dispatch[cmd] = to
        elif head == "packet":
            if len(tokens) != 5:
                raise _err(lineno, "expected 'packet STATE addr=A cmd=C data=D'", raw)
            st = tokens[1]
            if st not in state_names:
                raise _err(lineno, f"unknown state {st!r}", raw)
            if st in packets:
                raise _err(lineno, f"duplicate packet template for {st!r}", raw)
            fields: dict[str, str | None] = {}
            for tok, key in zip(tokens[2:], ("addr", "cmd", "data")):
                if not tok.startswith(key + "="):
                    raise _err(lineno, f"expected '{key}=...'", raw)
                value = tok[len(key) + 1:]
                fields[key] = None if value == "nil" else _check_name(value, lineno, raw)
            packets[st] = PacketTemplate(**fields)
        else:
            raise _err(lineno, f"unknown directive {head!r}", raw)

    return SpecDocument(roster=roster, fsm=fsm, dispatch=dispatch, packets=packets)


def serialize_spec(doc: SpecDocument) -> str:
    """Render a document in the canonical order: roster order for sections,
    transitions grouped by event name alphabetically, states in roster order."""
    out = io.StringIO()
    out.write("states {\n")
    for s in doc.roster.states:
        suffix = " synthetic" if s.synthetic else ""
        out.write(f"  {s.name}: {s.kind.value}{suffix}\n")
    out.write("}\n")
    for label, members in (("events", doc.roster.events), ("commands", doc.roster.commands)):
        out.write(f"{label} {{\n")
        for m in members:
            suffix = " synthetic" if m.synthetic else ""
            out.write(f"  {m.name}{suffix}\n")
        out.write("}\n")

    state_order = {name: i for i, name in enumerate(doc.roster.state_names)}
    for ev in sorted(doc.fsm):
        per = doc.fsm[ev]
        for frm in sorted(per, key=lambda n: state_order.get(n, len(state_order))):
            out.write(f"transition {ev} {frm} -> {per[frm]}\n")
    for cmd in doc.roster.command_names:
        if cmd in doc.dispatch:
            out.write(f"dispatch {cmd} -> {doc.dispatch[cmd]}\n")
    for st in doc.roster.state_names:
        if st in doc.packets:
            t = doc.packets[st]
            out.write(
                f"packet {st} addr={t.addr or 'nil'} cmd={t.cmd or 'nil'} "
                f"data={t.data or 'nil'}\n"
            )
    return out.getvalue()


def load_spec(path) -> SpecDocument:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


def load_bundled_cando() -> SpecDocument:
    """The embedded CANDO machine: 34 states, 21 events, 17 commands."""
    from .bundled import build_cando_spec

    return build_cando_spec()


def bundled_spec_path():
    """Filesystem path of the shipped ``cando.fsm`` copy of the bundled spec."""
    return resources.files("candofsm").joinpath("data/cando.fsm")


# ---------------------------------------------------------------------------
# Trace CSV

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_trace_csv(rows: Iterable, fh: IO[str]) -> None:
    """Write trace rows with the fixed header.

    The attribution cell flattens the per-field map to the sorted,
    ``;``-separated union of requirement ids.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in rows:
        ids = sorted({rid for rids in row.attribution.values() for rid in rids})
        writer.writerow([
            row.round, row.state, row.event, row.command,
            _cell(row.packet_addr), _cell(row.packet_cmd), _cell(row.packet_data),
            row.bytes_sent, row.bytes_received, row.tx_cnt,
            _cell(row.tx_finish), _cell(row.rx_finish), _cell(row.cmd_finish),
            ";".join(ids),
        ])


def read_trace_csv(fh: IO[str]):
    """Read a trace CSV back into rows.

    Per-field attribution cannot be recovered from the flattened cell, so the
    ids come back under the single wildcard key ``"*"``.
    """
    from .trace import TraceRow

    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(1, 1, "empty trace file") from None
    if tuple(header) != TRACE_COLUMNS:
        raise ParseError(1, 1, f"bad trace header: expected {','.join(TRACE_COLUMNS)}")

    def parse_bool(cell: str, lineno: int) -> bool:
        if cell == "true":
            return True
        if cell == "false":
            return False
        raise ParseError(lineno, 1, f"bad boolean cell {cell!r}")

    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(TRACE_COLUMNS):
            raise ParseError(lineno, 1, f"expected {len(TRACE_COLUMNS)} cells, got {len(rec)}")
        try:
            round_no = int(rec[0])
            bs, br, tx = int(rec[7]), int(rec[8]), int(rec[9])
        except ValueError:
            raise ParseError(lineno, 1, "bad integer cell") from None
        attribution = {}
        if rec[13]:
            attribution["*"] = tuple(rec[13].split(";"))
        rows.append(TraceRow(
            round=round_no, state=rec[1], event=rec[2], command=rec[3],
            packet_addr=rec[4] or None, packet_cmd=rec[5] or None,
            packet_data=rec[6] or None,
            bytes_sent=bs, bytes_received=br, tx_cnt=tx,
            tx_finish=parse_bool(rec[10], lineno),
            rx_finish=parse_bool(rec[11], lineno),
            cmd_finish=parse_bool(rec[12], lineno),
            attribution=attribution,
        ))
    return rows
