import numpy as np
import pytest
from hypothesis import settings

from graphkirchhoff import fixtures as fx
from graphkirchhoff.energy import Problem
from graphkirchhoff.verify import random_instance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# root of t^3 ln t = 2, the P3 indicator projection
P3_T0 = 1.6119880946958713


@pytest.fixture
def p3():
    return fx.path(3)


@pytest.fixture
def p3_problem(p3):
    return Problem(p3, fx.BASIC_PARAMS)


@pytest.fixture
def p4():
    return fx.path(4)


@pytest.fixture
def p5():
    return fx.path(5)


def make_random(seed, size_range=(3, 40)):
    """Problem and function of the verify generator for an integer seed."""
    return random_instance(np.random.default_rng(seed), size_range).build()


def random_direction(problem, seed):
    rng = np.random.default_rng(seed)
    return problem.gd.interior_function(rng.standard_normal(problem.gd.n_interior))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0].strip("[]"))):
            terminalreporter.write_line(line)
