"""Core FSM data model and the structural constraint checkers.

The machine is described by a roster (states with kinds, events, commands)
and a transition table mapping each event to a state-to-state map.  All
checkers are pure and report problems as :class:`Violation` values instead
of raising, so a single pass can collect every defect in a table.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping

# Packet protocol bounds.
PACKET_LENGTH = 3
MAX_COUNT = 2

# Distinguished state names the constraint rules key on.
START = "start"
GET_CMD = "get_cmd"
CMD_FINISH = "cmd_finish"
ERROR_ST = "error_"
CHIP_RST = "chip_rst"

# Distinguished event names.
CONT = "CONT"
ERROR_EV = "ERROR"
SPI_TX_FINISH = "SPI_TX_FINISH"
SPI_RX_FINISH = "SPI_RX_FINISH"
GET_CMD_E = "GET_CMD_E"

CONTROL_STATES = (START, GET_CMD, CMD_FINISH)
ERROR_STATES = (ERROR_ST, CHIP_RST)
REQUIRED_EVENTS = (CONT, ERROR_EV, SPI_TX_FINISH, SPI_RX_FINISH, GET_CMD_E)


class StateKind(enum.Enum):
    """Classification of a state; drives the class-level constraint rules."""

    SEND = "send"
    RECEIVE = "receive"
    CREATOR = "creator"
    CREATOR_STAGE1 = "creator_stage1"
    CREATOR_STAGE2 = "creator_stage2"
    ERROR = "error"
    CONTROL = "control"


# "Packet creator states" in the constraint rules means all three creator kinds.
CREATOR_KINDS = frozenset(
    {StateKind.CREATOR, StateKind.CREATOR_STAGE1, StateKind.CREATOR_STAGE2}
)

# Fixed catalogue of checker codes, in reporting order.
CONSTRAINT_CATALOGUE = (
    "C1.1", "C1.2", "C1.3", "C1.4", "C1.5", "C1.6", "C1.7", "C1.8",
    "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "C12",
    "TOTALITY", "ROSTER",
)
_CATALOGUE_RANK = {code: i for i, code in enumerate(CONSTRAINT_CATALOGUE)}


class FsmError(Exception):
    """Base class for FSM lookups gone wrong."""


class UnknownState(FsmError):
    def __init__(self, name: str):
        super().__init__(f"unknown state: {name!r}")
        self.name = name


class UnknownEvent(FsmError):
    def __init__(self, name: str):
        super().__init__(f"unknown event: {name!r}")
        self.name = name


class UnknownCommand(FsmError):
    def __init__(self, name: str):
        super().__init__(f"unknown command: {name!r}")
        self.name = name


class MissingTransition(FsmError):
    def __init__(self, event: str, state: str):
        super().__init__(f"no transition for state {state!r} under event {event!r}")
        self.event = event
        self.state = state


class MissingPacketTemplate(FsmError):
    def __init__(self, state: str):
        super().__init__(f"no packet template for creator state {state!r}")
        self.state = state


@dataclass(frozen=True)
class StateDef:
    name: str
    kind: StateKind
    synthetic: bool = False


@dataclass(frozen=True)
class MemberDef:
    """A roster member without a kind (event or command)."""

    name: str
    synthetic: bool = False


@dataclass(frozen=True)
class Roster:
    states: tuple[StateDef, ...]
    events: tuple[MemberDef, ...]
    commands: tuple[MemberDef, ...]

    def __post_init__(self) -> None:
        for label, names in (
            ("state", [s.name for s in self.states]),
            ("event", [e.name for e in self.events]),
            ("command", [c.name for c in self.commands]),
        ):
            if len(names) != len(set(names)):
                dupes = sorted({n for n in names if names.count(n) > 1})
                raise ValueError(f"duplicate {label} names: {dupes}")

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.states)

    @property
    def event_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.events)

    @property
    def command_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.commands)

    def kind_of(self, state: str) -> StateKind:
        for s in self.states:
            if s.name == state:
                return s.kind
        raise UnknownState(state)

    def states_of_kind(self, *kinds: StateKind) -> tuple[str, ...]:
        wanted = set(kinds)
        return tuple(s.name for s in self.states if s.kind in wanted)


# An FSM table maps each event name to a state -> successor-state map.
StateMap = Mapping[str, str]
FsmTable = Mapping[str, StateMap]


@dataclass(frozen=True)
class Violation:
    """One constraint breach; checkers return these instead of raising."""

    constraint_id: str
    event: str | None = None
    from_state: str | None = None
    to_state: str | None = None
    message: str = ""

    def sort_key(self) -> tuple:
        return (
            _CATALOGUE_RANK.get(self.constraint_id, len(_CATALOGUE_RANK)),
            self.event or "",
            self.from_state or "",
            self.to_state or "",
        )


def _sorted(violations: Iterable[Violation]) -> list[Violation]:
    return sorted(violations, key=Violation.sort_key)


def classify(roster: Roster, state: str) -> StateKind:
    """Return the kind recorded for ``state`` in the roster."""
    return roster.kind_of(state)


def lookup_next(fsm: FsmTable, event: str, state: str) -> str:
    """Pure table lookup of the successor of ``state`` under ``event``."""
    try:
        per_state = fsm[event]
    except KeyError:
        raise MissingTransition(event, state) from None
    try:
        return per_state[state]
    except KeyError:
        raise MissingTransition(event, state) from None


def check_roster(roster: Roster) -> list[Violation]:
    """Check the distinguished members and their kind assignments."""
    out: list[Violation] = []
    names = set(roster.state_names)
    for required in CONTROL_STATES + ERROR_STATES:
        if required not in names:
            out.append(
                Violation("ROSTER", from_state=required,
                          message=f"distinguished state {required!r} missing from roster")
            )
    for name in CONTROL_STATES:
        if name in names and roster.kind_of(name) is not StateKind.CONTROL:
            out.append(
                Violation("ROSTER", from_state=name,
                          message=f"state {name!r} must carry kind control")
            )
    for name in ERROR_STATES:
        if name in names and roster.kind_of(name) is not StateKind.ERROR:
            out.append(
                Violation("ROSTER", from_state=name,
                          message=f"state {name!r} must carry kind error")
            )
    for s in roster.states:
        if s.kind is StateKind.CONTROL and s.name not in CONTROL_STATES:
            out.append(
                Violation("ROSTER", from_state=s.name,
                          message=f"kind control is reserved for {CONTROL_STATES}, "
                                  f"not {s.name!r}")
            )
    for ev in REQUIRED_EVENTS:
        if ev not in roster.event_names:
            out.append(
                Violation("ROSTER", event=ev,
                          message=f"distinguished event {ev!r} missing from roster")
            )
    return _sorted(out)


def _check_entry(roster: Roster, frm: str, to: str) -> list[Violation]:
    """Apply the eight per-entry map rules C1.1..C1.8 to one entry."""
    out: list[Violation] = []
    kind_from = roster.kind_of(frm)
    kind_to = roster.kind_of(to)

    if to == START:
        out.append(Violation("C1.1", from_state=frm, to_state=to,
                             message=f"no state may map to {START!r}"))
    if frm == START and to not in (GET_CMD, ERROR_ST):
        out.append(Violation("C1.2", from_state=frm, to_state=to,
                             message=f"{START!r} maps only to {GET_CMD!r} or {ERROR_ST!r}"))
    if frm == CHIP_RST and to not in (GET_CMD, ERROR_ST):
        out.append(Violation("C1.3", from_state=frm, to_state=to,
                             message=f"{CHIP_RST!r} maps only to {GET_CMD!r} or {ERROR_ST!r}"))
    if frm == ERROR_ST and to not in (GET_CMD, ERROR_ST, CHIP_RST):
        out.append(Violation("C1.4", from_state=frm, to_state=to,
                             message=f"{ERROR_ST!r} maps only to {GET_CMD!r}, {ERROR_ST!r} "
                                     f"or {CHIP_RST!r}"))
    if frm == CMD_FINISH and to != ERROR_ST:
        out.append(Violation("C1.5", from_state=frm, to_state=to,
                             message=f"{CMD_FINISH!r} maps only to {ERROR_ST!r}"))
    if kind_from in CREATOR_KINDS and not (kind_to is StateKind.SEND or to == ERROR_ST):
        out.append(Violation("C1.6", from_state=frm, to_state=to,
                             message="packet creator states map only to send states "
                                     f"or {ERROR_ST!r}"))
    # Receive self-loops are admitted here: the identity entries demanded by the
    # SPI_RX_FINISH rule (C4) would otherwise make every total table invalid.
    if (
        kind_from is StateKind.RECEIVE
        and to != frm
        and not (kind_to is StateKind.CREATOR_STAGE2 or to in (CMD_FINISH, ERROR_ST))
    ):
        out.append(Violation("C1.7", from_state=frm, to_state=to,
                             message="receive states map only to stage-two creator "
                                     f"states, {CMD_FINISH!r}, {ERROR_ST!r} or themselves"))
    if frm == GET_CMD and not (kind_to is StateKind.CREATOR_STAGE1 or to == ERROR_ST):
        out.append(Violation("C1.8", from_state=frm, to_state=to,
                             message=f"{GET_CMD!r} maps only to stage-one creator "
                                     f"states or {ERROR_ST!r}"))
    return out


def check_statemap(roster: Roster, sm: StateMap, event: str | None = None) -> list[Violation]:
    """Check one state map against the per-entry rules C1.1..C1.8.

    The rules are per entry, so a map passes iff each of its entries passes;
    restricting a passing map to any key subset keeps it passing.
    """
    known = set(roster.state_names)
    out: list[Violation] = []
    for frm, to in sm.items():
        if frm not in known:
            raise UnknownState(frm)
        if to not in known:
            raise UnknownState(to)
        for v in _check_entry(roster, frm, to):
            out.append(
                Violation(v.constraint_id, event=event, from_state=v.from_state,
                          to_state=v.to_state, message=v.message)
            )
    return _sorted(out)


def check_totality(roster: Roster, fsm: FsmTable) -> list[Violation]:
    """Require an entry for every event and, per event, for every state.

    The printed totality invariant quantifies a state set over the table's
    event domain; the reading applied here (and cited in the messages) is
    totality over events with each per-event map total over states.
    """
    note = ("total FSM reading: every event present, each event map total over "
            "all states")
    out: list[Violation] = []
    for ev in roster.event_names:
        if ev not in fsm:
            out.append(Violation("TOTALITY", event=ev,
                                 message=f"event {ev!r} absent from table ({note})"))
            continue
        per_state = fsm[ev]
        for st in roster.state_names:
            if st not in per_state:
                out.append(
                    Violation("TOTALITY", event=ev, from_state=st,
                              message=f"event {ev!r} lacks an entry for state "
                                      f"{st!r} ({note})")
                )
    return _sorted(out)


def check_cando(roster: Roster, fsm: FsmTable) -> list[Violation]:
    """Check the event-specific rules C2..C12 on a (nominally total) table.

    Each (event, state) pair is owned by at most one rule.  The named-state
    rules C7..C10 take their exact pairs; the class rules C2..C6 and C11 cover
    the rest of their event/kind scope; C12 guards entry into the error kind
    under CONT and GET_CMD_E (the error class is entered through error_ only,
    except for the reset hand-off sanctioned by C8).
    """
    out: list[Violation] = []

    def entry(ev: str, st: str) -> str | None:
        return fsm.get(ev, {}).get(st)

    kind = roster.kind_of

    for st in roster.state_names:
        to = entry(CONT, st)
        if to is None:
            continue
        if st == START:
            if to != GET_CMD:
                out.append(Violation("C7", event=CONT, from_state=st, to_state=to,
                                     message=f"under CONT, {START!r} maps to {GET_CMD!r}"))
        elif st == ERROR_ST:
            if to != CHIP_RST:
                out.append(Violation("C8", event=CONT, from_state=st, to_state=to,
                                     message=f"under CONT, {ERROR_ST!r} maps to {CHIP_RST!r}"))
        elif kind(st) is StateKind.ERROR:
            if to != ERROR_ST:
                out.append(Violation("C6", event=CONT, from_state=st, to_state=to,
                                     message=f"under CONT, error states map to {ERROR_ST!r}"))
        elif kind(st) is StateKind.SEND:
            if roster.kind_of(to) is not StateKind.RECEIVE:
                out.append(Violation("C2", event=CONT, from_state=st, to_state=to,
                                     message="under CONT, send states map to receive states"))
        elif kind(st) in CREATOR_KINDS:
            if roster.kind_of(to) is not StateKind.SEND:
                out.append(Violation("C5", event=CONT, from_state=st, to_state=to,
                                     message="under CONT, packet creator states map to "
                                             "send states"))
        elif kind(st) is StateKind.RECEIVE:
            if not (roster.kind_of(to) is StateKind.CREATOR_STAGE2 or to == CMD_FINISH):
                out.append(Violation("C11", event=CONT, from_state=st, to_state=to,
                                     message="under CONT, receive states map to stage-two "
                                             f"creator states or {CMD_FINISH!r}"))

    for st in roster.state_names:
        to = entry(SPI_TX_FINISH, st)
        if to is not None and kind(st) is StateKind.SEND and to != st:
            out.append(Violation("C3", event=SPI_TX_FINISH, from_state=st, to_state=to,
                                 message="under SPI_TX_FINISH, send states map to themselves"))
        to = entry(SPI_RX_FINISH, st)
        if to is not None and kind(st) is StateKind.RECEIVE and to != st:
            out.append(Violation("C4", event=SPI_RX_FINISH, from_state=st, to_state=to,
                                 message="under SPI_RX_FINISH, receive states map to "
                                         "themselves"))

    to = entry(GET_CMD_E, ERROR_ST)
    if to is not None and to != GET_CMD:
        out.append(Violation("C9", event=GET_CMD_E, from_state=ERROR_ST, to_state=to,
                             message=f"under GET_CMD_E, {ERROR_ST!r} maps to {GET_CMD!r}"))
    to = entry(GET_CMD_E, CHIP_RST)
    if to is not None and to != GET_CMD:
        out.append(Violation("C10", event=GET_CMD_E, from_state=CHIP_RST, to_state=to,
                             message=f"under GET_CMD_E, {CHIP_RST!r} maps to {GET_CMD!r}"))

    # C12: the error class is entered only through error_ itself.  The one
    # sanctioned exception is the reset hand-off error_ -> chip_rst under CONT
    # (rule C8); GET_CMD_E routes error states out via C9/C10 and everything
    # else it touches must fall back to error_.
    for ev in (CONT, GET_CMD_E):
        for st in roster.state_names:
            to = entry(ev, st)
            if to is None or to == ERROR_ST:
                continue
            if kind(to) is StateKind.ERROR and (ev, st) != (CONT, ERROR_ST):
                out.append(
                    Violation("C12", event=ev, from_state=st, to_state=to,
                              message=f"under {ev}, the error class is entered through "
                                      f"{ERROR_ST!r} only (stays error_ unless a named "
                                      "rule overrides)")
                )

    return _sorted(out)


def reachable(fsm: FsmTable, origin: str, events: Iterable[str]) -> frozenset[str]:
    """States reachable from ``origin`` by table lookups under ``events``.

    Breadth-first closure; always contains ``origin``.
    """
    evs = tuple(events)
    seen = {origin}
    queue = deque([origin])
    while queue:
        st = queue.popleft()
        for ev in evs:
            nxt = fsm.get(ev, {}).get(st)
            if nxt is not None and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return frozenset(seen)


# Role predicates matching the named map flavours of the source model.

def is_total_statemap(roster: Roster, sm: StateMap) -> bool:
    return set(sm) == set(roster.state_names)


def is_idmap(sm: StateMap) -> bool:
    return all(frm == to for frm, to in sm.items())


def is_errormap(roster: Roster, sm: StateMap) -> bool:
    return all(roster.kind_of(frm) is StateKind.ERROR for frm in sm)


def is_packetmap(roster: Roster, sm: StateMap) -> bool:
    return all(roster.kind_of(frm) in CREATOR_KINDS for frm in sm)


def is_receivemap(roster: Roster, sm: StateMap) -> bool:
    return all(roster.kind_of(frm) is StateKind.RECEIVE for frm in sm)
