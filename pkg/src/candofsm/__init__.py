"""Twin-representation verification toolkit for the CANDO optrode control FSM.

The same machine exists twice here: as an executable operational model
(:mod:`candofsm.opmodel`) and as a generated round-based requirements model
(:mod:`candofsm.generate` feeding :mod:`candofsm.reqs`).  The structural
checkers (:mod:`candofsm.fsm`) validate the shared transition table, and the
trace tools (:mod:`candofsm.trace`) prove the two representations agree for
every initial command.
"""

from .fsm import (
    MAX_COUNT,
    PACKET_LENGTH,
    MemberDef,
    Roster,
    StateDef,
    StateKind,
    Violation,
    check_cando,
    check_roster,
    check_statemap,
    check_totality,
    classify,
    lookup_next,
    reachable,
)
from .specio import (
    PacketTemplate,
    ParseError,
    SpecDocument,
    bundled_spec_path,
    load_bundled_cando,
    load_spec,
    parse_spec,
    serialize_spec,
)
from .opmodel import ModelState, Packet, StepOutcome, init_model, run, state_operation, step
from .generate import GenReport, gen_dictionary, gen_definitions, gen_requirements, generate_model
from .trace import (
    DiffEntry,
    EquivalenceReport,
    FieldMap,
    PACKET_FIELD_MAP,
    Trace,
    TraceRow,
    diff,
    equivalence_report,
    trace_all,
)

__version__ = "0.1.0"

__all__ = [
    "GenReport", "DiffEntry", "EquivalenceReport", "FieldMap", "MAX_COUNT",
    "MemberDef", "ModelState", "PACKET_FIELD_MAP", "PACKET_LENGTH", "Packet",
    "PacketTemplate", "ParseError", "Roster", "SpecDocument", "StateDef",
    "StateKind", "StepOutcome", "Trace", "TraceRow", "Violation",
    "bundled_spec_path", "check_cando", "check_roster", "check_statemap",
    "check_totality", "classify", "diff", "equivalence_report",
    "gen_definitions", "gen_dictionary", "gen_requirements", "generate_model",
    "init_model", "load_bundled_cando", "load_spec", "lookup_next",
    "parse_spec", "reachable", "run", "serialize_spec", "state_operation",
    "step", "trace_all",
]
