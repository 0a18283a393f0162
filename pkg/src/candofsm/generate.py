"""Mechanical translation of a spec document into a requirements model.

States become an exclusive mode component; events and commands become
enumerations read through current-event / current-command signals; the
byte and retransmission counters become bounded integers with next_*
shadow signals.  Every transition table entry becomes one trigger-on-event
requirement ("<from> to <to>"), the data-dependent get_cmd hand-off becomes
one requirement per dispatch target guarded by its command group, and each
state's operation is split into guarded requirements per conditional branch
with strengthened end-of-round monitors (exact end event and counter delta).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .fsm import (
    CHIP_RST,
    CMD_FINISH,
    CONT,
    ERROR_ST,
    GET_CMD,
    GET_CMD_E,
    MAX_COUNT,
    MissingPacketTemplate,
    PACKET_LENGTH,
    SPI_RX_FINISH,
    SPI_TX_FINISH,
    START,
    StateKind,
    CREATOR_KINDS,
)
from .specio import SpecDocument
from .reqs.expr import BinOp, DefRef, Lit, ModeActive, Not, SigRead
from .reqs.model import (
    BoolType,
    CaseBranch,
    ConstantDef,
    DataDictionary,
    Definition,
    EnumType,
    ModeAssign,
    ModeComponent,
    Requirement,
    RequirementsModel,
    SignalAssign,
    SignalDef,
    Template,
)

STATE_COMPONENT = "fsm"

# Scale of the hand-written model of this machine, for the generation report.
HAND_MODEL_RECORDS = 26
HAND_MODEL_DEFINITIONS = 105
HAND_MODEL_REQUIREMENTS = 113

_KIND_LABELS = {
    StateKind.SEND: "send",
    StateKind.RECEIVE: "receive",
    StateKind.CREATOR: "packet creator",
    StateKind.CREATOR_STAGE1: "stage-one packet creation",
    StateKind.CREATOR_STAGE2: "stage-two packet creation",
    StateKind.ERROR: "error",
    StateKind.CONTROL: "control",
}


def _balanced(op: str, exprs: list):
    # pairwise fold keeps the tree depth logarithmic; the arrival condition
    # of a heavily targeted state can have hundreds of disjuncts
    while len(exprs) > 1:
        exprs = [
            BinOp(op, exprs[i], exprs[i + 1]) if i + 1 < len(exprs) else exprs[i]
            for i in range(0, len(exprs), 2)
        ]
    return exprs[0]


def _and(*exprs):
    return _balanced("and", list(exprs))


def _or_all(exprs):
    exprs = list(exprs)
    if not exprs:
        return Lit(False)
    return _balanced("or", exprs)


def _eq(name: str, value) -> BinOp:
    return BinOp("=", SigRead(name), Lit(value))


def _event_is(event: str) -> BinOp:
    return _eq("current_event", event)


@dataclass(frozen=True)
class GenReport:
    data_records: int
    definitions: int
    requirements: int
    id_index: Mapping[tuple[str, str, str], str]

    def summary(self) -> str:
        return (
            f"generated: {self.data_records} data records, "
            f"{self.definitions} definitions, {self.requirements} requirements\n"
            f"hand-built reference model: {HAND_MODEL_RECORDS} data records, "
            f"{HAND_MODEL_DEFINITIONS} definitions, "
            f"{HAND_MODEL_REQUIREMENTS} requirements\n"
        )


def gen_dictionary(spec: SpecDocument) -> DataDictionary:
    """Data dictionary: state modes, event/command enumerations, flag signals,
    bounded counters with next_* shadows, and the three packet field signals."""
    roster = spec.roster
    addr_symbols = tuple(sorted({t.addr for t in spec.packets.values() if t.addr}))
    data_symbols = tuple(sorted({t.data for t in spec.packets.values() if t.data}))
    types = (
        EnumType("Event", roster.event_names),
        EnumType("Command", roster.command_names),
        BoolType("Flag"),
        EnumType("Address", addr_symbols),
        EnumType("PacketData", data_symbols),
    )
    constants = (
        ConstantDef("PACKET_LENGTH", "int", PACKET_LENGTH),
        ConstantDef("MAX_COUNT", "int", MAX_COUNT),
    )
    # naturals are modelled as integers with an explicit floor of zero
    signals = (
        SignalDef("current_event", "Event", initial=CONT),
        SignalDef("current_command", "Command", initial=None),
        SignalDef("command_finish_flag", "Flag", initial=False),
        SignalDef("optrode_TX_finish", "Flag", initial=False),
        SignalDef("optrode_RX_finish", "Flag", initial=False),
        SignalDef("bytes_sent", "int", minimum=0, maximum=PACKET_LENGTH, initial=0),
        SignalDef("bytes_received", "int", minimum=0, maximum=PACKET_LENGTH, initial=0),
        SignalDef("tx_cnt", "int", minimum=0, maximum=MAX_COUNT, initial=0),
        SignalDef("next_bytes_sent", "int", minimum=0, maximum=PACKET_LENGTH, initial=0),
        SignalDef("next_bytes_received", "int", minimum=0, maximum=PACKET_LENGTH,
                  initial=0),
        SignalDef("next_tx_cnt", "int", minimum=0, maximum=MAX_COUNT, initial=0),
        SignalDef("packet_addr", "Address", initial=None),
        SignalDef("packet_cmd", "Command", initial=None),
        SignalDef("packet_data", "PacketData", initial=None),
    )
    modes = (
        ModeComponent(STATE_COMPONENT, roster.state_names, exclusive=True,
                      initial=START),
    )
    return DataDictionary(types=types, constants=constants, signals=signals,
                          modes=modes)


def _preimage(spec: SpecDocument) -> dict[str, list[tuple[str, str]]]:
    """(event, from) pairs leading into each state, excluding the dispatch
    hand-off pair (CONT, get_cmd) which is command dependent."""
    out: dict[str, list[tuple[str, str]]] = {s: [] for s in spec.roster.state_names}
    for ev in spec.roster.event_names:
        per = spec.fsm.get(ev, {})
        for frm in spec.roster.state_names:
            to = per.get(frm)
            if to is None or (ev == CONT and frm == GET_CMD and spec.dispatch):
                continue
            out[to].append((ev, frm))
    return out


def _dispatch_groups(spec: SpecDocument) -> dict[str, tuple[str, ...]]:
    """Dispatch targets to their command groups, in roster order."""
    groups: dict[str, list[str]] = {}
    for cmd in spec.roster.command_names:
        target = spec.dispatch.get(cmd)
        if target is not None:
            groups.setdefault(target, []).append(cmd)
    return {t: tuple(cmds) for t, cmds in groups.items()}


def _arrival_terms(spec: SpecDocument, state: str):
    """Start-snapshot conditions under which this round transitions into
    ``state``: the table preimage terms plus any dispatch-group term.

    Under the two SPI completion events the identity-map reading is encoded
    instead of the table: a send (receive) state is re-entered from itself,
    never from elsewhere.  On a table passing the checkers the two coincide.
    """
    kind = spec.roster.kind_of(state)
    terms = [
        _and(DefRef(f"from_{frm}"), _event_is(ev))
        for ev, frm in _preimage(spec)[state]
        if ev not in (SPI_TX_FINISH, SPI_RX_FINISH)
    ]
    if kind is StateKind.SEND:
        terms.append(_and(DefRef(f"from_{state}"), _event_is(SPI_TX_FINISH)))
    elif kind is StateKind.RECEIVE:
        terms.append(_and(DefRef(f"from_{state}"), _event_is(SPI_RX_FINISH)))
    group = _dispatch_groups(spec).get(state)
    if group:
        terms.append(_and(
            DefRef(f"from_{GET_CMD}"), _event_is(CONT),
            _or_all([_eq("current_command", c) for c in group]),
        ))
    return terms


def gen_definitions(spec: SpecDocument) -> tuple[Definition, ...]:
    """Per-state from/to definitions, per-kind groups combined with logical
    OR, the identity-map definitions for send and receive states, and the
    arrival conditions used by the operation requirements."""
    roster = spec.roster
    defs: list[Definition] = []
    for st in roster.state_names:
        defs.append(Definition(
            f"from_{st}",
            f"The fsm is in state {st} at the start of the round",
            ModeActive(STATE_COMPONENT, st, "start")))
        defs.append(Definition(
            f"to_{st}",
            f"The fsm is in state {st} at the end of the round",
            ModeActive(STATE_COMPONENT, st, "end")))

    kinds_present = []
    for kind in StateKind:
        members = roster.states_of_kind(kind)
        if members:
            kinds_present.append((kind, members))
    for kind, members in kinds_present:
        label = _KIND_LABELS[kind]
        defs.append(Definition(
            f"from_kind_{kind.value}",
            f"The fsm is in a {label} state at the start of the round",
            _or_all([DefRef(f"from_{s}") for s in members])))
        defs.append(Definition(
            f"to_kind_{kind.value}",
            f"The fsm is in a {label} state at the end of the round",
            _or_all([DefRef(f"to_{s}") for s in members])))
    creators = roster.states_of_kind(*CREATOR_KINDS)
    defs.append(Definition(
        "from_kind_creators",
        "The fsm is in a packet creator state at the start of the round",
        _or_all([DefRef(f"from_{s}") for s in creators])))
    defs.append(Definition(
        "to_kind_creators",
        "The fsm is in a packet creator state at the end of the round",
        _or_all([DefRef(f"to_{s}") for s in creators])))

    sends = roster.states_of_kind(StateKind.SEND)
    receives = roster.states_of_kind(StateKind.RECEIVE)
    defs.append(Definition(
        "idmap_send",
        "Every send state active at the start of the round is active at the end",
        Lit(True) if not sends else _and(*[
            BinOp("or", Not(DefRef(f"from_{s}")), DefRef(f"to_{s}")) for s in sends
        ])))
    defs.append(Definition(
        "idmap_receive",
        "Every receive state active at the start of the round is active at the end",
        Lit(True) if not receives else _and(*[
            BinOp("or", Not(DefRef(f"from_{s}")), DefRef(f"to_{s}")) for s in receives
        ])))
    defs.append(Definition(
        "receive_self_loop",
        "Some receive state is active at both the start and the end of the round",
        _or_all([_and(DefRef(f"from_{s}"), DefRef(f"to_{s}")) for s in receives])))

    for st in roster.state_names:
        terms = _arrival_terms(spec, st)
        if terms:
            defs.append(Definition(
                f"arrive_{st}",
                f"A transition into {st} fires this round",
                _or_all(terms)))
    return tuple(defs)


def _state_op_requirements(spec: SpecDocument, state: str) -> list[Requirement]:
    """The operation of one state, split per conditional branch, with the
    counter updates going through next_* shadows under within-0 obligations."""
    kind = spec.roster.kind_of(state)
    arrive = DefRef(f"arrive_{state}")
    reqs: list[Requirement] = []

    def toe(suffix: str, title: str, guard, effects, required=None, within=None):
        reqs.append(Requirement(
            req_id=f"op.{state}.{suffix}", title=title,
            template=Template.TRIGGER_ON_EVENT, guard=guard,
            effects=tuple(effects), required=required, within=within))

    if state == START:
        return reqs
    if state == GET_CMD:
        toe("event", "get_cmd awaits the command",
            arrive, [SignalAssign("current_event", Lit(CONT))])
        return reqs
    if state == CMD_FINISH:
        toe("flag", "cmd_finish raises the command finish flag",
            arrive, [SignalAssign("command_finish_flag", Lit(True)),
                     SignalAssign("current_event", Lit(CONT))])
        return reqs
    if state == ERROR_ST:
        toe("event", "error_ idles", arrive,
            [SignalAssign("current_event", Lit(CONT))])
        return reqs
    if state == CHIP_RST:
        toe("reset", "chip_rst clears flags, counters and the packet",
            arrive,
            [SignalAssign("bytes_sent", Lit(0)),
             SignalAssign("bytes_received", Lit(0)),
             SignalAssign("tx_cnt", Lit(0)),
             SignalAssign("next_bytes_sent", Lit(0)),
             SignalAssign("next_bytes_received", Lit(0)),
             SignalAssign("next_tx_cnt", Lit(0)),
             SignalAssign("command_finish_flag", Lit(False)),
             SignalAssign("optrode_TX_finish", Lit(False)),
             SignalAssign("optrode_RX_finish", Lit(False)),
             SignalAssign("packet_addr", Lit(None)),
             SignalAssign("packet_cmd", Lit(None)),
             SignalAssign("packet_data", Lit(None)),
             SignalAssign("current_event", Lit(GET_CMD_E))])
        return reqs

    if kind in (StateKind.CREATOR_STAGE1, StateKind.CREATOR):
        template = spec.packets.get(state)
        if template is None:
            raise MissingPacketTemplate(state)
        cmd_expr = (Lit(template.cmd) if template.cmd is not None
                    else SigRead("current_command"))
        toe("make", f"{state} creates the packet address and command",
            arrive,
            [SignalAssign("packet_addr", Lit(template.addr)),
             SignalAssign("packet_cmd", cmd_expr),
             SignalAssign("packet_data", Lit(template.data)),
             SignalAssign("current_event", Lit(CONT))])
        return reqs
    if kind is StateKind.CREATOR_STAGE2:
        template = spec.packets.get(state)
        if template is None:
            raise MissingPacketTemplate(state)
        toe("data", f"{state} fills in the packet data",
            arrive,
            [SignalAssign("packet_data", Lit(template.data)),
             SignalAssign("current_event", Lit(CONT))])
        return reqs

    if kind is StateKind.SEND:
        counting = _and(arrive, BinOp("<", SigRead("bytes_sent"), Lit(PACKET_LENGTH)))
        done = _and(arrive, _eq("bytes_sent", PACKET_LENGTH))
        can_count_tx = _and(done, BinOp("<", SigRead("tx_cnt"), Lit(MAX_COUNT)))
        toe("count_next", f"{state} stages the next byte count",
            counting,
            [SignalAssign("next_bytes_sent",
                          BinOp("+", SigRead("bytes_sent"), Lit(1)))])
        toe("count", f"{state} sends one byte",
            counting,
            [SignalAssign("bytes_sent", BinOp("+", SigRead("bytes_sent"), Lit(1))),
             SignalAssign("current_event", Lit(SPI_TX_FINISH))],
            required=BinOp("=", SigRead("bytes_sent"), SigRead("next_bytes_sent")),
            within=0)
        reqs.append(Requirement(
            req_id=f"op.{state}.done",
            title=f"{state} completes the transmission",
            template=Template.CASE,
            branches=(CaseBranch(done, (
                SignalAssign("bytes_sent", Lit(0)),
                SignalAssign("optrode_TX_finish", Lit(True)),
                SignalAssign("current_event", Lit(CONT)),
            )),)))
        toe("tx_next", f"{state} stages the transmission count",
            can_count_tx,
            [SignalAssign("next_tx_cnt", BinOp("+", SigRead("tx_cnt"), Lit(1)))])
        toe("tx", f"{state} counts the completed transmission",
            can_count_tx,
            [SignalAssign("tx_cnt", BinOp("+", SigRead("tx_cnt"), Lit(1)))],
            required=BinOp("=", SigRead("tx_cnt"), SigRead("next_tx_cnt")),
            within=0)
        return reqs
    if kind is StateKind.RECEIVE:
        counting = _and(arrive, BinOp("<", SigRead("bytes_received"),
                                      Lit(PACKET_LENGTH)))
        done = _and(arrive, _eq("bytes_received", PACKET_LENGTH))
        toe("count_next", f"{state} stages the next byte count",
            counting,
            [SignalAssign("next_bytes_received",
                          BinOp("+", SigRead("bytes_received"), Lit(1)))])
        toe("count", f"{state} receives one byte",
            counting,
            [SignalAssign("bytes_received",
                          BinOp("+", SigRead("bytes_received"), Lit(1))),
             SignalAssign("current_event", Lit(SPI_RX_FINISH))],
            required=BinOp("=", SigRead("bytes_received"),
                           SigRead("next_bytes_received")),
            within=0)
        reqs.append(Requirement(
            req_id=f"op.{state}.done",
            title=f"{state} completes the reception",
            template=Template.CASE,
            branches=(CaseBranch(done, (
                SignalAssign("bytes_received", Lit(0)),
                SignalAssign("optrode_RX_finish", Lit(True)),
                SignalAssign("current_event", Lit(CONT)),
            )),)))
        return reqs
    raise AssertionError(f"unhandled kind {kind} for {state!r}")


def _post_monitors(spec: SpecDocument, state: str) -> list[Requirement]:
    """Strengthened post-conditions: the exact end event (and counter value
    relative to its start) for every branch of the state's operation."""
    kind = spec.roster.kind_of(state)
    arrive = DefRef(f"arrive_{state}")
    reqs: list[Requirement] = []

    def when(suffix: str, title: str, guard, required):
        reqs.append(Requirement(
            req_id=f"post.{state}.{suffix}", title=title,
            template=Template.WHEN, guard=guard, required=required))

    if state == START:
        return reqs
    if state == CHIP_RST:
        when("reset", f"after {state} everything is cleared",
             arrive,
             _and(_event_is(GET_CMD_E), _eq("bytes_sent", 0),
                  _eq("bytes_received", 0), _eq("tx_cnt", 0),
                  Not(SigRead("command_finish_flag")),
                  Not(SigRead("optrode_TX_finish")),
                  Not(SigRead("optrode_RX_finish"))))
        return reqs
    if state == CMD_FINISH:
        when("flag", f"after {state} the finish flag is up",
             arrive, _and(_event_is(CONT), SigRead("command_finish_flag")))
        return reqs
    if kind is StateKind.SEND:
        when("progress", f"{state} in progress ends in SPI_TX_FINISH",
             _and(arrive, BinOp("<", SigRead("bytes_sent"), Lit(PACKET_LENGTH))),
             _and(_event_is(SPI_TX_FINISH),
                  BinOp("=", SigRead("bytes_sent"), SigRead("next_bytes_sent"))))
        when("complete", f"{state} completion counts the transmission",
             _and(arrive, _eq("bytes_sent", PACKET_LENGTH),
                  BinOp("<", SigRead("tx_cnt"), Lit(MAX_COUNT))),
             _and(_event_is(CONT), _eq("bytes_sent", 0),
                  SigRead("optrode_TX_finish"),
                  BinOp("=", SigRead("tx_cnt"), SigRead("next_tx_cnt"))))
        when("saturated", f"{state} completion at the retransmission cap",
             _and(arrive, _eq("bytes_sent", PACKET_LENGTH),
                  BinOp(">=", SigRead("tx_cnt"), Lit(MAX_COUNT))),
             _and(_event_is(CONT), _eq("bytes_sent", 0),
                  SigRead("optrode_TX_finish"), _eq("tx_cnt", MAX_COUNT)))
        return reqs
    if kind is StateKind.RECEIVE:
        when("progress", f"{state} in progress ends in SPI_RX_FINISH",
             _and(arrive, BinOp("<", SigRead("bytes_received"), Lit(PACKET_LENGTH))),
             _and(_event_is(SPI_RX_FINISH),
                  BinOp("=", SigRead("bytes_received"),
                        SigRead("next_bytes_received"))))
        when("complete", f"{state} completion raises the receive flag",
             _and(arrive, _eq("bytes_received", PACKET_LENGTH)),
             _and(_event_is(CONT), _eq("bytes_received", 0),
                  SigRead("optrode_RX_finish")))
        return reqs
    # control, error and creator operations all end in a fixed event
    when("event", f"after {state} the event is CONT", arrive, _event_is(CONT))
    return reqs


def _class_monitors(spec: SpecDocument) -> list[Requirement]:
    roster = spec.roster
    reqs: list[Requirement] = [Requirement(
        req_id="mon.C1.1", title="no transition targets start",
        template=Template.EVERY,
        required=Not(ModeActive(STATE_COMPONENT, START, "end")))]
    if not any(spec.fsm.get(ev) for ev in roster.event_names):
        return reqs  # with no transitions the run-time rules have nothing to watch
    have = set(roster.state_names)

    def when(code: str, title: str, guard, required, needs=()):
        if all(s in have for s in needs):
            reqs.append(Requirement(req_id=f"mon.{code}", title=title,
                                    template=Template.WHEN, guard=guard,
                                    required=required))

    to_err = DefRef(f"to_{ERROR_ST}")
    when("C1.2", "start moves to get_cmd or error_",
         DefRef(f"from_{START}"), _or_all([DefRef(f"to_{GET_CMD}"), to_err]),
         needs=(START, GET_CMD, ERROR_ST))
    when("C1.3", "chip_rst moves to get_cmd or error_",
         DefRef(f"from_{CHIP_RST}"), _or_all([DefRef(f"to_{GET_CMD}"), to_err]),
         needs=(CHIP_RST, GET_CMD, ERROR_ST))
    when("C1.4", "error_ moves to get_cmd, error_ or chip_rst",
         DefRef(f"from_{ERROR_ST}"),
         _or_all([DefRef(f"to_{GET_CMD}"), to_err, DefRef(f"to_{CHIP_RST}")]),
         needs=(ERROR_ST, GET_CMD, CHIP_RST))
    when("C1.5", "cmd_finish moves to error_",
         DefRef(f"from_{CMD_FINISH}"), to_err, needs=(CMD_FINISH, ERROR_ST))
    when("C1.6", "packet creators move to send states or error_",
         DefRef("from_kind_creators"),
         _or_all([DefRef("to_kind_send"), to_err]), needs=(ERROR_ST,))
    when("C1.7", "receives move to stage-two creators, cmd_finish, error_ or "
                 "themselves",
         DefRef("from_kind_receive"),
         _or_all([DefRef("to_kind_creator_stage2"), DefRef(f"to_{CMD_FINISH}"),
                  to_err, DefRef("receive_self_loop")]),
         needs=(CMD_FINISH, ERROR_ST))
    when("C1.8", "get_cmd moves to stage-one creators or error_",
         DefRef(f"from_{GET_CMD}"),
         _or_all([DefRef("to_kind_creator_stage1"), to_err]),
         needs=(GET_CMD, ERROR_ST))
    when("C2", "under CONT send states move to receive states",
         _and(DefRef("from_kind_send"), _event_is(CONT)),
         DefRef("to_kind_receive"))
    when("C5", "under CONT packet creators move to send states",
         _and(DefRef("from_kind_creators"), _event_is(CONT)),
         DefRef("to_kind_send"))
    other_error = [s for s in roster.states_of_kind(StateKind.ERROR)
                   if s != ERROR_ST]
    if other_error and ERROR_ST in have:
        when("C6", "under CONT error states move to error_",
             _and(_or_all([DefRef(f"from_{s}") for s in other_error]),
                  _event_is(CONT)),
             to_err)
    when("C11", "under CONT receives move to stage-two creators or cmd_finish",
         _and(DefRef("from_kind_receive"), _event_is(CONT)),
         _or_all([DefRef("to_kind_creator_stage2"), DefRef(f"to_{CMD_FINISH}")]),
         needs=(CMD_FINISH,))
    return reqs


def gen_requirements(spec: SpecDocument) -> tuple[tuple[Requirement, ...], GenReport]:
    """All requirements plus the generation report with the id index.

    Ids are stable: the requirement for table entry (event e, state s) is
    ``"<eventIndex>.<stateIndex>"``; the extra dispatch-target requirements
    extend that with the target index.
    """
    roster = spec.roster
    event_index = {e: i for i, e in enumerate(roster.event_names)}
    state_index = {s: i for i, s in enumerate(roster.state_names)}
    groups = _dispatch_groups(spec)

    reqs: list[Requirement] = []
    id_index: dict[tuple[str, str, str], str] = {}

    for ev in roster.event_names:
        per = spec.fsm.get(ev, {})
        for frm in roster.state_names:
            to = per.get(frm)
            if to is None:
                continue
            base_id = f"{event_index[ev]}.{state_index[frm]:02d}"
            if ev == CONT and frm == GET_CMD and groups:
                # one requirement per dispatch target; the one matching the
                # table entry owns the table id
                for target in sorted(groups, key=state_index.get):
                    rid = (base_id if target == to
                           else f"{base_id}.{state_index[target]:02d}")
                    reqs.append(Requirement(
                        req_id=rid, title=f"{frm} to {target}",
                        template=Template.TRIGGER_ON_EVENT,
                        guard=_and(
                            DefRef(f"from_{frm}"), _event_is(ev),
                            _or_all([_eq("current_command", c)
                                     for c in groups[target]])),
                        effects=(ModeAssign(STATE_COMPONENT, target),)))
                    id_index[(ev, frm, target)] = rid
            else:
                reqs.append(Requirement(
                    req_id=base_id, title=f"{frm} to {to}",
                    template=Template.TRIGGER_ON_EVENT,
                    guard=_and(DefRef(f"from_{frm}"), _event_is(ev)),
                    effects=(ModeAssign(STATE_COMPONENT, to),)))
                id_index[(ev, frm, to)] = base_id

    preimage = _preimage(spec)
    for st in roster.state_names:
        if preimage[st] or st in groups:
            reqs.extend(_state_op_requirements(spec, st))
    for st in roster.state_names:
        if preimage[st] or st in groups:
            reqs.extend(_post_monitors(spec, st))
    reqs.extend(_class_monitors(spec))
    reqs.append(Requirement(
        req_id=f"modeset.{STATE_COMPONENT}",
        title="the fsm is in exactly one state at a time",
        template=Template.MODE_SET, component=STATE_COMPONENT, exclusive=True))

    dictionary = gen_dictionary(spec)
    definitions = gen_definitions(spec)
    report = GenReport(
        data_records=dictionary.record_count,
        definitions=len(definitions),
        requirements=len(reqs),
        id_index=id_index,
    )
    return tuple(reqs), report


def generate_model(spec: SpecDocument) -> tuple[RequirementsModel, GenReport]:
    """Dictionary, definitions and requirements as one validated model."""
    requirements, report = gen_requirements(spec)
    model = RequirementsModel(
        dictionary=gen_dictionary(spec),
        definitions=gen_definitions(spec),
        requirements=requirements,
    )
    model.validate()
    return model, report


# --- prose rendering ---------------------------------------------------------

def _prose(expr, defs: Mapping[str, Definition]) -> str:
    if isinstance(expr, DefRef) and expr.name in defs:
        return defs[expr.name].text
    if isinstance(expr, ModeActive):
        return (f"The {expr.component} is in state {expr.mode} at the "
                f"{expr.at} of the round")
    if isinstance(expr, Lit):
        if expr.value is None:
            return "nil"
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        return str(expr.value)
    if isinstance(expr, SigRead):
        return expr.name.replace("_", " ")
    if isinstance(expr, Not):
        return f"it is not the case that {_prose(expr.operand, defs)}"
    if isinstance(expr, BinOp):
        if expr.op == "=" and isinstance(expr.left, SigRead):
            return (f"The {expr.left.name.replace('_', ' ')} is "
                    f"{_prose(expr.right, defs)}")
        joiner = {"and": "and", "or": "or"}.get(expr.op, expr.op)
        return f"{_prose(expr.left, defs)} {joiner} {_prose(expr.right, defs)}"
    return str(expr)


def _effect_prose(effect, defs: Mapping[str, Definition]) -> str:
    if isinstance(effect, ModeAssign):
        name = f"to_{effect.mode}"
        if name in defs:
            return defs[name].text
        return f"The {effect.component} is in state {effect.mode} at the end of the round"
    return (f"The {effect.name.replace('_', ' ')} is set to "
            f"{_prose(effect.expr, defs)}")


def _conjuncts(expr) -> list:
    if isinstance(expr, BinOp) and expr.op == "and":
        return _conjuncts(expr.left) + _conjuncts(expr.right)
    return [expr]


def _requirement_block(req: Requirement, defs: Mapping[str, Definition],
                       project: str) -> list[str]:
    lines = [f"### {project}/{req.req_id}: {req.title}", ""]
    if req.template is Template.TRIGGER_ON_EVENT:
        lines.append("If")
        first, *rest = _conjuncts(req.guard)
        lines.append(f"  {_prose(first, defs)}")
        lines.extend(f"  and {_prose(part, defs)}" for part in rest)
        lines.append("occurs, then")
        for effect in req.effects:
            lines.append(f"  {_effect_prose(effect, defs)}")
        if req.required is not None:
            within = f" within {req.within} rounds" if req.within is not None else ""
            lines.append(f"  and {_prose(req.required, defs)}{within}")
        lines.append("holds.")
    elif req.template is Template.WHEN:
        lines.append("Whenever")
        lines.append(f"  {_prose(req.guard, defs)}")
        lines.append("holds, then")
        lines.append(f"  {_prose(req.required, defs)}")
        lines.append("holds.")
    elif req.template is Template.EVERY:
        lines.append("At all times,")
        lines.append(f"  {_prose(req.required, defs)}")
        lines.append("holds.")
    elif req.template is Template.MODE_SET:
        exclusivity = "exactly one" if req.exclusive else "any number"
        lines.append(f"The {req.component} component has {exclusivity} of its "
                     "modes active at a time.")
    elif req.template is Template.CASE:
        for i, branch in enumerate(req.branches, start=1):
            lines.append(f"Case {i}: if {_prose(branch.guard, defs)} then")
            for effect in branch.effects:
                lines.append(f"  {_effect_prose(effect, defs)}")
    else:
        lines.append(f"({req.template.value} requirement on {req.signal})")
    lines.append("")
    return lines


def render_requirements_markdown(model: RequirementsModel,
                                 project: str = "cando") -> str:
    defs = model.definition_map()
    lines = [f"# Requirements model: {project}", ""]
    for req in model.requirements:
        lines.extend(_requirement_block(req, defs, project))
    return "\n".join(lines) + "\n"


def render_requirements_html(model: RequirementsModel,
                             project: str = "cando") -> str:
    import html as _html

    defs = model.definition_map()
    out = ["<!DOCTYPE html>", "<html><head><meta charset=\"utf-8\">",
           f"<title>Requirements model: {_html.escape(project)}</title>",
           "</head><body>",
           f"<h1>Requirements model: {_html.escape(project)}</h1>"]
    for req in model.requirements:
        block = _requirement_block(req, defs, project)
        out.append(f"<h3>{_html.escape(block[0][4:])}</h3>")
        body = "\n".join(block[2:]).strip()
        out.append(f"<pre>{_html.escape(body)}</pre>")
    out.append("</body></html>")
    return "\n".join(out) + "\n"
