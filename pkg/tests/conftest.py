import numpy as np
import pytest
from hypothesis import settings

from ltbound import distributions as dist
from ltbound.harness import ExperimentSpec, run_experiment
from ltbound.localtime import METHODS
from ltbound.stopping import FirstExit

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# the reference Monte Carlo configuration used throughout the examples
N_PATHS = 50_000
DT = 1e-4
EPS = 0.02


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def symmetric_exit_summary():
    """First exit from (-1, 1), 5e4 paths, both estimators at x in {-0.5, 0, 0.5}."""
    spec = ExperimentSpec(FirstExit.from_ab(1.0, 1.0), (-0.5, 0.0, 0.5), N_PATHS, DT, EPS,
                          METHODS, seed=101)
    return run_experiment(spec)


@pytest.fixture(scope="session")
def three_point():
    return dist.FiniteSupport(((-1, 0.25), (0, 0.5), (1, 0.25)))


def finite_laws(n_laws, seed=0, max_atoms=8):
    """Random mean-zero finite-support laws (2..max_atoms atoms)."""
    from ltbound.acceptance import random_laws

    return random_laws(n_laws, seed=seed, max_atoms=max_atoms)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number].line())
