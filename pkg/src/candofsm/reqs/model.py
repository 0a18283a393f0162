"""Data dictionary, definitions, requirement templates and the round env."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .expr import DefRef, has_end_reads, referenced_definitions, walk


class ModelError(Exception):
    """A structurally invalid requirements model."""


# --- data dictionary -------------------------------------------------------

@dataclass(frozen=True)
class BoolType:
    name: str


@dataclass(frozen=True)
class IntType:
    name: str
    lo: int | None = None
    hi: int | None = None


@dataclass(frozen=True)
class EnumType:
    name: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class ArrayType:
    name: str
    element: str
    size: int


@dataclass(frozen=True)
class ConstantDef:
    name: str
    type_name: str
    value: object
    minimum: object | None = None
    maximum: object | None = None
    tolerance: object | None = None


@dataclass(frozen=True)
class SignalDef:
    name: str
    type_name: str
    minimum: int | None = None
    maximum: int | None = None
    initial: object = None


@dataclass(frozen=True)
class ModeComponent:
    name: str
    modes: tuple[str, ...]
    exclusive: bool = True
    initial: str | None = None


@dataclass(frozen=True)
class DataDictionary:
    types: tuple = ()
    constants: tuple[ConstantDef, ...] = ()
    signals: tuple[SignalDef, ...] = ()
    modes: tuple[ModeComponent, ...] = ()

    def type_named(self, name: str):
        for t in self.types:
            if t.name == name:
                return t
        return None

    def signal_named(self, name: str) -> SignalDef | None:
        for s in self.signals:
            if s.name == name:
                return s
        return None

    def component_named(self, name: str) -> ModeComponent | None:
        for m in self.modes:
            if m.name == name:
                return m
        return None

    @property
    def record_count(self) -> int:
        return (len(self.types) + len(self.constants)
                + len(self.signals) + len(self.modes))

    def validate(self) -> None:
        names = ([t.name for t in self.types] + [c.name for c in self.constants]
                 + [s.name for s in self.signals] + [m.name for m in self.modes])
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ModelError(f"duplicate dictionary record names: {dupes}")
        component_names = {m.name for m in self.modes}
        for t in self.types:
            if isinstance(t, ArrayType):
                if t.element in component_names:
                    raise ModelError(
                        f"array type {t.name!r}: element type may not be a mode")
                if self.type_named(t.element) is None and t.element not in (
                    "int", "bool"
                ):
                    raise ModelError(
                        f"array type {t.name!r}: unknown element type {t.element!r}")
        basic = {"int", "bool"}
        for s in self.signals:
            if s.type_name not in basic and self.type_named(s.type_name) is None:
                raise ModelError(f"signal {s.name!r}: unknown type {s.type_name!r}")
        for m in self.modes:
            if m.initial is not None and m.initial not in m.modes:
                raise ModelError(
                    f"mode component {m.name!r}: initial {m.initial!r} not a mode")

    def int_bounds(self, signal: SignalDef) -> tuple[int | None, int | None]:
        lo, hi = signal.minimum, signal.maximum
        t = self.type_named(signal.type_name)
        if isinstance(t, IntType):
            lo = t.lo if lo is None else lo
            hi = t.hi if hi is None else hi
        return lo, hi

    def enum_members(self, signal: SignalDef) -> tuple[str, ...] | None:
        t = self.type_named(signal.type_name)
        return t.members if isinstance(t, EnumType) else None


# --- definitions and requirements ------------------------------------------

@dataclass(frozen=True)
class Definition:
    name: str
    text: str
    expr: object
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class SignalAssign:
    name: str
    expr: object


@dataclass(frozen=True)
class ModeAssign:
    component: str
    mode: str


Assignment = SignalAssign | ModeAssign


class Template(enum.Enum):
    EVERY = "every"
    WHEN = "when"
    TRIGGER_ON_EVENT = "trigger"
    LATCH = "latch"
    TRIGGER_ON_CHANGE = "onchange"
    MODE_SET = "modeset"
    CASE = "case"


@dataclass(frozen=True)
class CaseBranch:
    guard: object
    effects: tuple[Assignment, ...]


@dataclass(frozen=True)
class Requirement:
    req_id: str
    title: str
    template: Template
    guard: object | None = None              # trigger / when-guard / latch-while
    required: object | None = None           # monitored or obliged condition
    effects: tuple[Assignment, ...] = ()
    within: int | None = None
    at_some_point: bool = False
    component: str | None = None             # mode-set target
    exclusive: bool = True
    signal: str | None = None                # latch / trigger-on-change subject
    value: object | None = None              # latch hold value
    branches: tuple[CaseBranch, ...] = ()
    total: bool = False
    constructive: bool = False               # trigger-on-change opt-in


@dataclass(frozen=True)
class Obligation:
    req_id: str
    expr: object
    due_round: int | None                    # None: unbounded (at some point)
    registered_round: int


@dataclass(frozen=True)
class Env:
    """Record values at a round boundary, plus history and open obligations."""

    signals: Mapping[str, object]
    modes: Mapping[str, frozenset[str]]
    history: frozenset[tuple[str, str, str]] = frozenset()
    pending: tuple[Obligation, ...] = ()
    round_no: int = 0


def _history_of(modes: Mapping[str, frozenset[str]], components) -> frozenset:
    out = set()
    for comp in components:
        for mode in comp.modes:
            status = "active" if mode in modes.get(comp.name, frozenset()) else "inactive"
            out.add((comp.name, mode, status))
    return frozenset(out)


def initial_env(model: RequirementsModel,
                overrides: Mapping[str, object] | None = None) -> Env:
    """Round-0 env from declared initial values; overrides patch signals."""
    signals: dict[str, object] = {}
    for c in model.dictionary.constants:
        signals[c.name] = c.value
    for s in model.dictionary.signals:
        signals[s.name] = s.initial
    if overrides:
        for name, value in overrides.items():
            if name not in signals:
                raise ModelError(f"override of unknown signal {name!r}")
            signals[name] = value
    modes = {
        m.name: (frozenset({m.initial}) if m.initial is not None else frozenset())
        for m in model.dictionary.modes
    }
    return Env(
        signals=signals,
        modes=modes,
        history=_history_of(modes, model.dictionary.modes),
        pending=(),
        round_no=0,
    )


@dataclass(frozen=True)
class RequirementsModel:
    dictionary: DataDictionary
    definitions: tuple[Definition, ...] = ()
    requirements: tuple[Requirement, ...] = ()

    def definition_map(self) -> dict[str, Definition]:
        return {d.name: d for d in self.definitions}

    def validate(self) -> None:
        """Structural checks: unique ids, acyclic definitions, end-of-round
        reads confined to required conditions, latch and trigger-on-change
        subjects being raw signals."""
        self.dictionary.validate()

        names = [d.name for d in self.definitions]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ModelError(f"duplicate definition names: {dupes}")
        ids = [r.req_id for r in self.requirements]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ModelError(f"duplicate requirement ids: {dupes}")

        defs = self.definition_map()
        # acyclicity of the definition reference graph
        state: dict[str, int] = {}  # 1 visiting, 2 done

        def visit(name: str) -> None:
            if state.get(name) == 2:
                return
            if state.get(name) == 1:
                raise ModelError(f"definition cycle through {name!r}")
            state[name] = 1
            target = defs.get(name)
            if target is not None:
                for ref in sorted(referenced_definitions(target.expr)):
                    visit(ref)
            state[name] = 2

        for name in names:
            visit(name)

        def check_guard(expr, where: str) -> None:
            if expr is not None and has_end_reads(expr, defs):
                raise ModelError(
                    f"{where}: end-of-round reads are only legal in required "
                    "conditions")

        for r in self.requirements:
            check_guard(r.guard, f"requirement {r.req_id}: guard")
            for a in r.effects:
                if isinstance(a, SignalAssign):
                    check_guard(a.expr, f"requirement {r.req_id}: effect {a.name}")
                    if self.dictionary.signal_named(a.name) is None:
                        raise ModelError(
                            f"requirement {r.req_id}: effect targets unknown or "
                            f"non-signal record {a.name!r}")
                else:
                    comp = self.dictionary.component_named(a.component)
                    if comp is None or a.mode not in comp.modes:
                        raise ModelError(
                            f"requirement {r.req_id}: bad mode assignment "
                            f"{a.component}.{a.mode}")
            for branch in r.branches:
                check_guard(branch.guard, f"requirement {r.req_id}: case guard")
            if r.template in (Template.LATCH, Template.TRIGGER_ON_CHANGE):
                if r.signal is None or self.dictionary.signal_named(r.signal) is None:
                    raise ModelError(
                        f"requirement {r.req_id}: {r.template.value} needs a raw "
                        "signal, not a definition")
            if r.template is Template.MODE_SET:
                if r.component is None or self.dictionary.component_named(r.component) is None:
                    raise ModelError(
                        f"requirement {r.req_id}: mode-set needs a mode component")
            # definition references must resolve
            for expr in (r.guard, r.required, r.value):
                if expr is None:
                    continue
                for node in walk(expr):
                    if isinstance(node, DefRef) and node.name not in defs:
                        raise ModelError(
                            f"requirement {r.req_id}: unknown definition "
                            f"{node.name!r}")
