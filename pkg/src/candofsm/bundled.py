"""Construction of the bundled CANDO optrode-control machine.

The roster carries the named members of the machine (start, get_cmd,
cmd_finish, error_, chip_rst, LED_off, set_vLED, set_sDac, send_packet_3,
send_packet_6, receive_packet_27, receive_packet_28 and the five named
events / three named commands); everything needed to reach the full
34 states / 21 events / 17 commands is synthesized systematically and
flagged ``synthetic`` so tests never treat those members as ground truth.

The transition table is total (21 x 34 entries) and satisfies every
structural rule in :mod:`candofsm.fsm`.  Each command's dispatch target
heads an acyclic create/send/receive chain that ends in cmd_finish.
"""

from __future__ import annotations

from .fsm import (
    CHIP_RST,
    CMD_FINISH,
    CONT,
    ERROR_EV,
    ERROR_ST,
    GET_CMD,
    GET_CMD_E,
    MemberDef,
    Roster,
    SPI_RX_FINISH,
    SPI_TX_FINISH,
    START,
    StateDef,
    StateKind,
)
from .specio import PacketTemplate, SpecDocument

# The command whose dispatch chain reproduces the documented valid sequence
# set_vLED -> send_packet_6 -> receive_packet_28 -> set_sDac -> send_packet_3
# -> receive_packet_27 -> cmd_finish.  Which command exercises that chain is
# a convention of this bundle, not a given.
VLED_COMMAND = "LED_ON_C"

_STAGE1 = (
    "set_vLED", "LED_off", "set_diag", "set_memLen",
    "set_fsRatio", "set_recConfig", "set_stim", "set_dummy",
)
_STAGE2 = ("set_sDac", "set_dDelay", "set_mData", "set_fData", "set_rData")
_SENDS = tuple(f"send_packet_{i}" for i in range(1, 9))
_RECEIVES = tuple(f"receive_packet_{i}" for i in range(21, 29))

_NAMED_STATES = {
    START, GET_CMD, CMD_FINISH, ERROR_ST, CHIP_RST,
    "LED_off", "set_vLED", "set_sDac",
    "send_packet_3", "send_packet_6",
    "receive_packet_27", "receive_packet_28",
}

_EVENTS = (CONT, ERROR_EV, SPI_TX_FINISH, SPI_RX_FINISH, GET_CMD_E) + tuple(
    f"EVT_{i}" for i in range(6, 22)
)
_NAMED_EVENTS = {CONT, ERROR_EV, SPI_TX_FINISH, SPI_RX_FINISH, GET_CMD_E}

_COMMANDS = (
    "LED_ON_C", "LED_OFF_C", "DUMMY_C",
    "SET_DAC_C", "READ_DAC_C", "DIAG_DELAY_C",
    "MEM_LEN_C", "MEM_READ_C", "MEM_WRITE_C",
    "FS_RATIO_C", "REC_CONFIG_C", "REC_START_C", "REC_STOP_C",
    "STIM_START_C", "STIM_STOP_C", "STATUS_C", "RESET_C",
)
_NAMED_COMMANDS = {"LED_ON_C", "LED_OFF_C", "DUMMY_C"}

# Continue-event successors: the acyclic packet chains.
_CONT_MAP = {
    START: GET_CMD,
    GET_CMD: "set_vLED",        # table default; runs consult the dispatch table
    CMD_FINISH: ERROR_ST,
    ERROR_ST: CHIP_RST,
    CHIP_RST: ERROR_ST,
    # stage-one creators enter their chain's first send state
    "set_vLED": "send_packet_6",
    "LED_off": "send_packet_1",
    "set_diag": "send_packet_2",
    "set_memLen": "send_packet_5",
    "set_fsRatio": "send_packet_8",
    "set_recConfig": "send_packet_4",
    "set_stim": "send_packet_7",
    "set_dummy": "send_packet_1",
    # stage-two creators send the data packet they just filled in
    "set_sDac": "send_packet_3",
    "set_dDelay": "send_packet_4",
    "set_mData": "send_packet_7",
    "set_fData": "send_packet_3",
    "set_rData": "send_packet_5",
    # each send completes into its paired receive
    "send_packet_1": "receive_packet_21",
    "send_packet_2": "receive_packet_22",
    "send_packet_3": "receive_packet_27",
    "send_packet_4": "receive_packet_23",
    "send_packet_5": "receive_packet_24",
    "send_packet_6": "receive_packet_28",
    "send_packet_7": "receive_packet_25",
    "send_packet_8": "receive_packet_26",
    # receives either hand over to a stage-two creator or finish the command
    "receive_packet_21": CMD_FINISH,
    "receive_packet_22": "set_dDelay",
    "receive_packet_23": "set_rData",
    "receive_packet_24": "set_mData",
    "receive_packet_25": CMD_FINISH,
    "receive_packet_26": "set_fData",
    "receive_packet_27": CMD_FINISH,
    "receive_packet_28": "set_sDac",
}

_DISPATCH = {
    "LED_ON_C": "set_vLED",
    "SET_DAC_C": "set_vLED",
    "LED_OFF_C": "LED_off",
    "DUMMY_C": "set_dummy",
    "READ_DAC_C": "set_dummy",
    "STATUS_C": "set_dummy",
    "RESET_C": "set_dummy",
    "DIAG_DELAY_C": "set_diag",
    "MEM_LEN_C": "set_memLen",
    "MEM_READ_C": "set_memLen",
    "MEM_WRITE_C": "set_memLen",
    "FS_RATIO_C": "set_fsRatio",
    "REC_CONFIG_C": "set_recConfig",
    "REC_START_C": "set_recConfig",
    "REC_STOP_C": "set_recConfig",
    "STIM_START_C": "set_stim",
    "STIM_STOP_C": "set_stim",
}

_PACKETS = {
    # stage one: address plus command (cmd nil in the template means the
    # current command is filled in at creation time)
    "set_vLED": PacketTemplate(addr="Optrode_addr", cmd=None, data="LED_addr"),
    "LED_off": PacketTemplate(addr="Optrode_addr", cmd=None, data="NO_LED_ADDR"),
    "set_diag": PacketTemplate(addr="Optrode_addr", cmd=None, data=None),
    "set_memLen": PacketTemplate(addr="Optrode_addr", cmd=None, data="mem_len"),
    "set_fsRatio": PacketTemplate(addr="Optrode_addr", cmd=None, data=None),
    "set_recConfig": PacketTemplate(addr="Optrode_addr", cmd=None, data=None),
    "set_stim": PacketTemplate(addr="Optrode_addr", cmd=None, data=None),
    "set_dummy": PacketTemplate(addr="Optrode_addr", cmd=None, data=None),
    # stage two: the data field only
    "set_sDac": PacketTemplate(data="DAC_value"),
    "set_dDelay": PacketTemplate(data="diag_delay"),
    "set_mData": PacketTemplate(data="constructed_data"),
    "set_fData": PacketTemplate(data="fs_ratio_to_clk"),
    "set_rData": PacketTemplate(data="rec_config"),
}

# Packet field symbol universe (used by the requirements generator).
ADDRESS_SYMBOLS = ("Optrode_addr",)
PACKET_DATA_SYMBOLS = (
    "LED_addr", "NO_LED_ADDR", "DAC_value", "diag_delay",
    "mem_len", "constructed_data", "fs_ratio_to_clk", "rec_config",
)


def _roster() -> Roster:
    states = [
        StateDef(START, StateKind.CONTROL),
        StateDef(GET_CMD, StateKind.CONTROL),
        StateDef(CMD_FINISH, StateKind.CONTROL),
        StateDef(ERROR_ST, StateKind.ERROR),
        StateDef(CHIP_RST, StateKind.ERROR),
    ]
    states += [StateDef(n, StateKind.CREATOR_STAGE1, n not in _NAMED_STATES) for n in _STAGE1]
    states += [StateDef(n, StateKind.CREATOR_STAGE2, n not in _NAMED_STATES) for n in _STAGE2]
    states += [StateDef(n, StateKind.SEND, n not in _NAMED_STATES) for n in _SENDS]
    states += [StateDef(n, StateKind.RECEIVE, n not in _NAMED_STATES) for n in _RECEIVES]
    events = [MemberDef(n, n not in _NAMED_EVENTS) for n in _EVENTS]
    commands = [MemberDef(n, n not in _NAMED_COMMANDS) for n in _COMMANDS]
    return Roster(states=tuple(states), events=tuple(events), commands=tuple(commands))


def _table(roster: Roster) -> dict[str, dict[str, str]]:
    all_states = roster.state_names
    sends = set(_SENDS)
    receives = set(_RECEIVES)

    fsm: dict[str, dict[str, str]] = {CONT: dict(_CONT_MAP)}
    fsm[SPI_TX_FINISH] = {s: (s if s in sends else ERROR_ST) for s in all_states}
    fsm[SPI_RX_FINISH] = {s: (s if s in receives else ERROR_ST) for s in all_states}
    fsm[GET_CMD_E] = {
        s: (GET_CMD if s in (ERROR_ST, CHIP_RST) else ERROR_ST) for s in all_states
    }
    fsm[ERROR_EV] = {s: ERROR_ST for s in all_states}
    # EVT_6..EVT_13 route get_cmd to the eight alternate chain heads so every
    # chain is reachable from start by table lookups alone; the remaining
    # synthesized events treat everything as a fault.
    for i, head in enumerate(_STAGE1):
        fsm[f"EVT_{6 + i}"] = {
            s: (head if s == GET_CMD else ERROR_ST) for s in all_states
        }
    for i in range(14, 22):
        fsm[f"EVT_{i}"] = {s: ERROR_ST for s in all_states}
    return fsm


def build_cando_spec() -> SpecDocument:
    """Build the bundled machine; pure and deterministic."""
    roster = _roster()
    return SpecDocument(
        roster=roster,
        fsm=_table(roster),
        dispatch=dict(_DISPATCH),
        packets=dict(_PACKETS),
    )
