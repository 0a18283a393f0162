from __future__ import annotations

import dataclasses

import pytest

from candofsm import load_bundled_cando
from candofsm.generate import generate_model


@pytest.fixture(scope="session")
def spec():
    return load_bundled_cando()


@pytest.fixture(scope="session")
def generated(spec):
    """(model, report) for the bundled spec; generation is deterministic."""
    return generate_model(spec)


@pytest.fixture(scope="session")
def model(generated):
    return generated[0]


def mutate_table(spec, event: str, state: str, target: str | None):
    """Copy of the spec with one transition replaced (or removed on None)."""
    fsm = {e: dict(m) for e, m in spec.fsm.items()}
    if target is None:
        del fsm[event][state]
    else:
        fsm[event][state] = target
    return dataclasses.replace(spec, fsm=fsm)
