import numpy as np
import pytest

from quakehmm.catalog import ObservationSequence
from quakehmm.hmm import HmmParams

ACCEPTANCE_LINES: list[str] = []


def random_params(rng, n_states, n_regions=None, mean_range=(0.5, 30.0)):
    pi = rng.dirichlet(np.ones(n_states))
    trans = rng.dirichlet(np.ones(n_states), size=n_states)
    means = rng.uniform(*mean_range, size=n_states)
    q = None
    if n_regions is not None:
        q = rng.dirichlet(np.ones(n_regions), size=n_states)
    return HmmParams(pi, trans, means, q)


def random_obs(rng, length, n_regions=None, scale=8.0):
    y = rng.exponential(scale, size=length)
    v = None if n_regions is None else rng.integers(1, n_regions + 1, size=length)
    return ObservationSequence(y, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
