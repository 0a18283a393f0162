"""The executable operational model: a typed machine state plus a control loop.

Each round the machine runs the operation of its current state (counting
packet bytes, constructing packets, raising flags, choosing the next event)
and then moves through the transition table on the event the operation just
produced.  The one data-dependent transition is get_cmd under CONT, which
consults the command dispatch table instead of the table entry.

Every operation also carries a declarative post-condition (exact next event
and counter delta per branch); :func:`step` re-evaluates it after executing
and reports breaches as violations, which stay empty on a conforming spec.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

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
    UnknownCommand,
    Violation,
    classify,
    lookup_next,
)
from .specio import SpecDocument
from .trace import Trace, TraceRow


class RunError(Exception):
    """A step failure tagged with the round it happened in."""

    def __init__(self, round_no: int, cause: Exception):
        super().__init__(f"round {round_no}: {cause}")
        self.round_no = round_no
        self.cause = cause


@dataclass(frozen=True)
class Packet:
    addr: str | None = None
    cmd: str | None = None
    data: str | None = None


@dataclass(frozen=True)
class ModelState:
    current_state: str
    current_event: str
    current_command: str
    command_finish_flag: bool = False
    optrode_tx_finish: bool = False
    optrode_rx_finish: bool = False
    packet: Packet | None = None
    bytes_received: int = 0
    bytes_sent: int = 0
    tx_cnt: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.bytes_sent <= PACKET_LENGTH:
            raise ValueError(f"bytes_sent out of range: {self.bytes_sent}")
        if not 0 <= self.bytes_received <= PACKET_LENGTH:
            raise ValueError(f"bytes_received out of range: {self.bytes_received}")
        if not 0 <= self.tx_cnt <= MAX_COUNT:
            raise ValueError(f"tx_cnt out of range: {self.tx_cnt}")


@dataclass(frozen=True)
class StepOutcome:
    next: ModelState
    fired_op: str
    post_violations: tuple[Violation, ...] = ()


def init_model(spec: SpecDocument, command: str) -> ModelState:
    """Fresh machine: in start, continue pending, nothing sent or built."""
    if command not in spec.roster.command_names:
        raise UnknownCommand(command)
    return ModelState(current_state=START, current_event=CONT, current_command=command)


def _instantiate_stage1(spec: SpecDocument, m: ModelState) -> Packet:
    template = spec.packets.get(m.current_state)
    if template is None:
        raise MissingPacketTemplate(m.current_state)
    return Packet(
        addr=template.addr,
        cmd=template.cmd if template.cmd is not None else m.current_command,
        data=template.data,
    )


def state_operation(spec: SpecDocument, m: ModelState) -> tuple[ModelState, str]:
    """Run the operation of the current state; returns the updated state
    (same current_state) and the name of the operation that fired."""
    st = m.current_state
    kind = classify(spec.roster, st)

    if st == START:
        return replace(m, current_event=CONT), "start_idle"
    if st == GET_CMD:
        return replace(m, current_event=CONT), "get_command"
    if st == CMD_FINISH:
        return replace(m, command_finish_flag=True, current_event=CONT), "finish_command"
    if st == ERROR_ST:
        return replace(m, current_event=CONT), "error_idle"
    if st == CHIP_RST:
        return (
            replace(
                m,
                command_finish_flag=False,
                optrode_tx_finish=False,
                optrode_rx_finish=False,
                packet=None,
                bytes_sent=0,
                bytes_received=0,
                tx_cnt=0,
                current_event=GET_CMD_E,
            ),
            "chip_reset",
        )
    if kind in (StateKind.CREATOR_STAGE1, StateKind.CREATOR):
        # A plain creator builds the whole packet the way stage one does.
        return (
            replace(m, packet=_instantiate_stage1(spec, m), current_event=CONT),
            "create_packet",
        )
    if kind is StateKind.CREATOR_STAGE2:
        template = spec.packets.get(st)
        if template is None:
            raise MissingPacketTemplate(st)
        base = m.packet or Packet()
        return (
            replace(m, packet=replace(base, data=template.data), current_event=CONT),
            "set_packet_data",
        )
    if kind is StateKind.SEND:
        if m.bytes_sent < PACKET_LENGTH:
            return (
                replace(m, bytes_sent=m.bytes_sent + 1, current_event=SPI_TX_FINISH),
                "send_packet",
            )
        return (
            replace(
                m,
                bytes_sent=0,
                optrode_tx_finish=True,
                tx_cnt=min(m.tx_cnt + 1, MAX_COUNT),
                current_event=CONT,
            ),
            "send_packet",
        )
    if kind is StateKind.RECEIVE:
        if m.bytes_received < PACKET_LENGTH:
            return (
                replace(m, bytes_received=m.bytes_received + 1,
                        current_event=SPI_RX_FINISH),
                "receive_packet",
            )
        return (
            replace(m, bytes_received=0, optrode_rx_finish=True, current_event=CONT),
            "receive_packet",
        )
    raise AssertionError(f"unhandled state kind {kind} for {st!r}")


def _op_contract(spec: SpecDocument, before: ModelState,
                 after: ModelState) -> list[Violation]:
    """Declarative post-condition: exact next event and tx_cnt delta per branch."""
    st = before.current_state
    kind = classify(spec.roster, st)

    expected_event = CONT
    expected_tx = before.tx_cnt
    if st == CHIP_RST:
        expected_event = GET_CMD_E
        expected_tx = 0
    elif kind is StateKind.SEND:
        if before.bytes_sent < PACKET_LENGTH:
            expected_event = SPI_TX_FINISH
        else:
            expected_tx = min(before.tx_cnt + 1, MAX_COUNT)
    elif kind is StateKind.RECEIVE and before.bytes_received < PACKET_LENGTH:
        expected_event = SPI_RX_FINISH

    out = []
    if after.current_event != expected_event:
        out.append(Violation("POST", event=after.current_event, from_state=st,
                             message=f"operation of {st!r} must end in event "
                                     f"{expected_event!r}, got {after.current_event!r}"))
    if after.tx_cnt != expected_tx:
        out.append(Violation("POST", from_state=st,
                             message=f"operation of {st!r} must leave tx_cnt at "
                                     f"{expected_tx}, got {after.tx_cnt}"))
    return out


def _move(spec: SpecDocument, m: ModelState) -> ModelState:
    """Transition on the current event; get_cmd under CONT uses dispatch."""
    if m.current_state == GET_CMD and m.current_event == CONT:
        target = spec.dispatch.get(m.current_command)
        if target is None:
            raise UnknownCommand(m.current_command)
        return replace(m, current_state=target)
    return replace(
        m, current_state=lookup_next(spec.fsm, m.current_event, m.current_state)
    )


def step(spec: SpecDocument, m: ModelState) -> StepOutcome:
    """One full step: state operation, post-condition check, transition."""
    operated, fired = state_operation(spec, m)
    violations = _op_contract(spec, m, operated)
    return StepOutcome(
        next=_move(spec, operated),
        fired_op=fired,
        post_violations=tuple(violations),
    )


def _snapshot(m: ModelState, round_no: int) -> TraceRow:
    packet = m.packet or Packet()
    return TraceRow(
        round=round_no,
        state=m.current_state,
        event=m.current_event,
        command=m.current_command,
        packet_addr=packet.addr,
        packet_cmd=packet.cmd,
        packet_data=packet.data,
        bytes_sent=m.bytes_sent,
        bytes_received=m.bytes_received,
        tx_cnt=m.tx_cnt,
        tx_finish=m.optrode_tx_finish,
        rx_finish=m.optrode_rx_finish,
        cmd_finish=m.command_finish_flag,
        attribution={},
    )


def run(spec: SpecDocument, command: str, max_rounds: int) -> Trace:
    """Drive the machine from init until the command finishes.

    Row 0 is the initial snapshot; every later row records the machine after
    that round's state operation (the transition into the next state uses the
    event shown on the row).  The run stops when the command-finish flag goes
    up, when error_ is entered with no non-self progress available, or when
    the row budget runs out.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    m = init_model(spec, command)
    rows = [_snapshot(m, 0)]
    reason = "budget"
    violations: list[Violation] = []
    round_no = 0
    while len(rows) < max_rounds:
        round_no += 1
        try:
            m = _move(spec, m)
            before = m
            m, _ = state_operation(spec, m)
        except Exception as exc:  # noqa: BLE001 - tag and re-raise any step fault
            raise RunError(round_no, exc) from exc
        violations.extend(_op_contract(spec, before, m))
        rows.append(_snapshot(m, round_no))
        if m.command_finish_flag:
            reason = "cmd_finish"
            break
        if (
            m.current_state == ERROR_ST
            and spec.fsm.get(CONT, {}).get(ERROR_ST) == ERROR_ST
        ):
            reason = "error"
            break
    return Trace(
        rows=tuple(rows),
        command=command,
        engine="ops",
        reason=reason,
        violations=tuple(violations),
    )
