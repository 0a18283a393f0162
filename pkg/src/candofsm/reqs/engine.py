"""Two-phase round evaluation and the round-based run loop.

One round takes the model from a start snapshot to an end snapshot:

1. guards and triggers are evaluated against the start snapshot;
2. constructive templates contribute end-of-round effects, every effect
   expression itself evaluated against the start snapshot only;
3. records nobody wrote carry their start value over (frame property);
   conflicting writes leave the start value and report both writers;
4. monitor templates are checked against the end snapshot;
5. mode-set exclusivity is checked on the end snapshot;
6. obligations fall due (within 0 means this very round) or expire;
7. status history and the pending obligation set are updated.

The function is total: breaches are returned as violations, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..fsm import Violation
from ..trace import Trace, TraceRow
from .expr import EvalContext, EvalError, eval_expr
from .model import (
    Env,
    Obligation,
    Requirement,
    RequirementsModel,
    SignalAssign,
    Template,
    _history_of,
    initial_env,
)


@dataclass(frozen=True)
class RoundResult:
    end_env: Env
    fired: tuple[tuple[str, tuple[str, ...]], ...]
    violations: tuple[Violation, ...]


def _violation(code: str, req: Requirement | None, message: str) -> Violation:
    prefix = f"requirement {req.req_id} ({req.title}): " if req else ""
    return Violation(code, message=prefix + message)


def fire_round(model: RequirementsModel, env: Env, prev_env: Env | None) -> RoundResult:
    defs = model.definition_map()
    current_round = env.round_no + 1
    guard_ctx = EvalContext(
        start_signals=env.signals, start_modes=env.modes, history=env.history,
        definitions=defs,
        prev_signals=prev_env.signals if prev_env else None,
        prev_modes=prev_env.modes if prev_env else None,
        ambient="start",
    )

    violations: list[Violation] = []
    # record key -> ordered writes; signals keyed ("sig", name), modes ("mode", comp)
    writes: dict[tuple[str, str], list[tuple[str, object]]] = {}
    new_obligations: list[Obligation] = []

    def guard_true(expr, req: Requirement) -> bool:
        if expr is None:
            return True
        try:
            value = eval_expr(expr, guard_ctx)
        except EvalError as exc:
            violations.append(_violation("EVAL", req, str(exc)))
            return False
        if not isinstance(value, bool):
            violations.append(_violation("EVAL", req, f"guard is not boolean: {value!r}"))
            return False
        return value

    def add_effects(req: Requirement, effects) -> None:
        for a in effects:
            if isinstance(a, SignalAssign):
                try:
                    value = eval_expr(a.expr, guard_ctx)
                except EvalError as exc:
                    violations.append(_violation("EVAL", req, str(exc)))
                    continue
                writes.setdefault(("sig", a.name), []).append((req.req_id, value))
            else:
                writes.setdefault(("mode", a.component), []).append((req.req_id, a.mode))

    def changed_signal(name: str) -> bool:
        return prev_env is not None and prev_env.signals.get(name) != env.signals.get(name)

    for req in model.requirements:
        t = req.template
        if t is Template.TRIGGER_ON_EVENT:
            if guard_true(req.guard, req):
                add_effects(req, req.effects)
                if req.required is not None:
                    due = (current_round + req.within
                           if req.within is not None
                           else (None if req.at_some_point else current_round))
                    new_obligations.append(
                        Obligation(req.req_id, req.required, due, current_round))
        elif t is Template.LATCH:
            if guard_true(req.guard, req):
                if req.value is not None:
                    try:
                        held = eval_expr(req.value, guard_ctx)
                    except EvalError as exc:
                        violations.append(_violation("EVAL", req, str(exc)))
                        continue
                else:
                    held = env.signals.get(req.signal)
                writes.setdefault(("sig", req.signal), []).append((req.req_id, held))
        elif t is Template.CASE:
            taken = False
            for branch in req.branches:
                if guard_true(branch.guard, req):
                    add_effects(req, branch.effects)
                    taken = True
                    break
            if not taken and req.total:
                violations.append(
                    _violation("CASE", req, "no branch matched a total case"))
        elif t is Template.TRIGGER_ON_CHANGE and req.constructive:
            if changed_signal(req.signal) and guard_true(req.guard, req):
                add_effects(req, req.effects)

    # build the end snapshot, detecting conflicts and range breaches
    end_signals = dict(env.signals)
    end_modes = dict(env.modes)
    fired: list[tuple[str, tuple[str, ...]]] = []
    applied: dict[str, list[str]] = {}

    for (kind, name), entries in writes.items():
        values = [v for _, v in entries]
        distinct = {repr(v) for v in values}
        if len(distinct) > 1:
            ids = ", ".join(rid for rid, _ in entries)
            violations.append(Violation(
                "CONFLICT",
                message=f"conflicting effects on {name!r} from requirements {ids}; "
                        "record keeps its start value"))
            continue
        value = values[0]
        if kind == "sig":
            sig = model.dictionary.signal_named(name)
            if sig is not None:
                lo, hi = model.dictionary.int_bounds(sig)
                members = model.dictionary.enum_members(sig)
                if (lo is not None or hi is not None) and not isinstance(value, bool) \
                        and isinstance(value, int):
                    if (lo is not None and value < lo) or (hi is not None and value > hi):
                        violations.append(Violation(
                            "RANGE",
                            message=f"assignment of {value!r} to {name!r} is outside "
                                    f"[{lo}, {hi}]; record keeps its start value"))
                        continue
                if members is not None and value is not None and value not in members:
                    violations.append(Violation(
                        "RANGE",
                        message=f"assignment of {value!r} to {name!r} is not a "
                                f"member of {sig.type_name}; record keeps its "
                                "start value"))
                    continue
            end_signals[name] = value
        else:
            end_modes[name] = frozenset({value})
        for rid, _ in entries:
            applied.setdefault(rid, []).append(name)

    for req in model.requirements:
        if req.req_id in applied:
            fired.append((req.req_id, tuple(applied[req.req_id])))

    end_ctx = EvalContext(
        start_signals=env.signals, start_modes=env.modes, history=env.history,
        definitions=defs, end_signals=end_signals, end_modes=end_modes,
        prev_signals=prev_env.signals if prev_env else None,
        prev_modes=prev_env.modes if prev_env else None,
        ambient="end",
    )

    def required_holds(expr, req: Requirement) -> bool:
        try:
            value = eval_expr(expr, end_ctx)
        except EvalError as exc:
            violations.append(_violation("EVAL", req, str(exc)))
            return True
        return bool(value)

    for req in model.requirements:
        t = req.template
        if t is Template.EVERY:
            if not required_holds(req.required, req):
                violations.append(_violation("MONITOR", req, "condition breached"))
        elif t is Template.WHEN:
            if guard_true(req.guard, req) and not required_holds(req.required, req):
                violations.append(_violation("MONITOR", req, "required condition "
                                                             "breached under guard"))
        elif t is Template.TRIGGER_ON_CHANGE and not req.constructive:
            if changed_signal(req.signal) and not required_holds(req.required, req):
                violations.append(_violation(
                    "MONITOR", req, f"condition breached on change of {req.signal!r}"))
        elif t is Template.MODE_SET and req.exclusive:
            active = end_modes.get(req.component, frozenset())
            if len(active) != 1:
                violations.append(_violation(
                    "MODESET", req,
                    f"component {req.component!r} has {len(active)} active modes "
                    "at end of round"))

    still_pending: list[Obligation] = []
    for ob in tuple(env.pending) + tuple(new_obligations):
        try:
            satisfied = bool(eval_expr(ob.expr, end_ctx))
        except EvalError as exc:
            violations.append(Violation(
                "EVAL", message=f"obligation of requirement {ob.req_id}: {exc}"))
            satisfied = False
        if satisfied:
            continue
        if ob.due_round is not None and ob.due_round <= current_round:
            violations.append(Violation(
                "OBLIGATION",
                message=f"obligation of requirement {ob.req_id} registered in round "
                        f"{ob.registered_round} expired unsatisfied in round "
                        f"{current_round}"))
            continue
        still_pending.append(ob)

    end_env = Env(
        signals=end_signals,
        modes=end_modes,
        history=env.history | _history_of(end_modes, model.dictionary.modes),
        pending=tuple(still_pending),
        round_no=current_round,
    )
    return RoundResult(end_env=end_env, fired=tuple(fired),
                       violations=tuple(violations))


def run_rounds(model: RequirementsModel, init_env: Env, stop, max_rounds: int,
               on_violation: str = "collect"):
    """Iterate rounds until ``stop(env)`` holds, a violation halts the run
    (``on_violation="halt"``), or the round budget is exhausted.

    Returns ``(envs, results, reason)`` with one env per round boundary
    (``envs[0]`` is the initial env) and one :class:`RoundResult` per round.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    envs = [init_env]
    results: list[RoundResult] = []
    prev: Env | None = None
    reason = "budget"
    while len(envs) < max_rounds:
        if stop is not None and stop(envs[-1]):
            reason = "stop"
            break
        result = fire_round(model, envs[-1], prev)
        prev = envs[-1]
        envs.append(result.end_env)
        results.append(result)
        if result.violations and on_violation == "halt":
            reason = "violation"
            break
    else:
        if stop is not None and stop(envs[-1]):
            reason = "stop"
    return envs, results, reason


# --- trace building over the generated record naming convention -------------

# dictionary record -> trace column (next_* shadows merge into their targets)
_SIGNAL_COLUMNS = {
    "current_event": "event",
    "current_command": "command",
    "command_finish_flag": "cmd_finish",
    "optrode_TX_finish": "tx_finish",
    "optrode_RX_finish": "rx_finish",
    "bytes_sent": "bytes_sent",
    "bytes_received": "bytes_received",
    "tx_cnt": "tx_cnt",
    "packet_addr": "packet_addr",
    "packet_cmd": "packet_cmd",
    "packet_data": "packet_data",
}
_SHADOW_COLUMNS = {
    "next_bytes_sent": "bytes_sent",
    "next_bytes_received": "bytes_received",
    "next_tx_cnt": "tx_cnt",
}
STATE_COMPONENT = "fsm"


def _env_row(env: Env, round_no: int, attribution) -> TraceRow:
    active = sorted(env.modes.get(STATE_COMPONENT, frozenset()))
    sig = env.signals
    return TraceRow(
        round=round_no,
        state="|".join(active),
        event=str(sig.get("current_event")),
        command=str(sig.get("current_command")),
        packet_addr=sig.get("packet_addr"),
        packet_cmd=sig.get("packet_cmd"),
        packet_data=sig.get("packet_data"),
        bytes_sent=int(sig.get("bytes_sent", 0)),
        bytes_received=int(sig.get("bytes_received", 0)),
        tx_cnt=int(sig.get("tx_cnt", 0)),
        tx_finish=bool(sig.get("optrode_TX_finish", False)),
        rx_finish=bool(sig.get("optrode_RX_finish", False)),
        cmd_finish=bool(sig.get("command_finish_flag", False)),
        attribution=attribution,
    )


def _round_attribution(result: RoundResult, row: TraceRow,
                       prev_row: TraceRow) -> dict[str, tuple[str, ...]]:
    """Requirement ids per changed trace column.  Shadow writers come first,
    so counters show the next-value updater and then the committing
    requirement, in that order."""
    by_column: dict[str, list[str]] = {}
    for rid, records in result.fired:
        for record in records:
            if record == STATE_COMPONENT:
                by_column.setdefault("state", []).append(rid)
            elif record in _SHADOW_COLUMNS:
                by_column.setdefault(_SHADOW_COLUMNS[record], []).insert(0, rid)
            elif record in _SIGNAL_COLUMNS:
                by_column.setdefault(_SIGNAL_COLUMNS[record], []).append(rid)
    new_values = row.values()
    old_values = prev_row.values()
    return {
        column: tuple(ids)
        for column, ids in by_column.items()
        if new_values.get(column) != old_values.get(column)
    }


def run_reqs(model: RequirementsModel, init_env: Env, stop, max_rounds: int,
             on_violation: str = "collect") -> Trace:
    """Iterate rounds from ``init_env`` and emit a trace.

    Row 0 is the initial env; each later row is the round's end snapshot with
    per-field attribution (rebuilt from the round's fired requirements, kept
    only on fields whose value changed).  The run halts on ``stop(env)``, on
    any violation when ``on_violation="halt"``, or on the row budget;
    obligations still open at the end of the run are reported as violations.
    """
    envs, results, reason = run_rounds(model, init_env, stop, max_rounds,
                                       on_violation)
    rows = [_env_row(envs[0], 0, {})]
    violations: list[Violation] = []
    for i, result in enumerate(results, start=1):
        row = _env_row(envs[i], i, {})
        attribution = _round_attribution(result, row, rows[-1])
        rows.append(_env_row(envs[i], i, attribution))
        violations.extend(result.violations)
    for ob in envs[-1].pending:
        if ob.due_round is None:
            violations.append(Violation(
                "OBLIGATION",
                message=f"at-some-point obligation of requirement {ob.req_id} "
                        "never satisfied before the run ended"))
    return Trace(
        rows=tuple(rows),
        command=str(envs[0].signals.get("current_command") or ""),
        engine="reqs",
        reason=reason,
        violations=tuple(violations),
    )


def run_requirements_trace(model: RequirementsModel, command: str,
                           max_rounds: int) -> Trace:
    """Run the model for one initial command, halting on its finish flag."""
    init = initial_env(model, overrides={"current_command": command})
    stop = lambda env: env.signals.get("command_finish_flag") is True  # noqa: E731
    trace = run_reqs(model, init, stop, max_rounds)
    if trace.reason == "stop":
        trace = Trace(rows=trace.rows, command=command, engine="reqs",
                      reason="cmd_finish", violations=trace.violations)
    return trace
