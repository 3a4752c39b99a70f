import functools

import numpy as np
import pytest

from fsdim import sequence
from fsdim.machine import Machine, ergodic_analysis

MEGA = 10**6

_ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def bits_of(source: str, n: int = MEGA) -> np.ndarray:
    out = sequence.generate(sequence.parse_source(source), n)
    out.setflags(write=False)
    return out


def random_machine(rng, nstates=None, betting=False, max_states=8) -> Machine:
    nq = nstates or int(rng.integers(1, max_states + 1))
    delta = rng.integers(0, nq, size=(nq, 2))
    beta = rng.uniform(0.02, 0.98, size=nq) if betting else None
    return Machine(tuple(f"q{i}" for i in range(nq)), delta, int(rng.integers(nq)), None, beta)


def random_strongly_connected(rng, max_states=10) -> Machine:
    """Random machine whose whole state set is one closed class."""
    while True:
        m = random_machine(rng, max_states=max_states)
        erg = ergodic_analysis(m)
        if erg.irreducible and len(erg.ergodic_sets[0]) == len(m):
            return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
