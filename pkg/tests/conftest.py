import numpy as np
import pytest

from pdfa import programs
from pdfa.lang import load_program
from pdfa.semantics import StateSpace


def load(name):
    return load_program(programs.read(name))


@pytest.fixture
def running():
    return load("running.pw")


@pytest.fixture
def example1():
    return load("example1.pw")


@pytest.fixture
def decrement():
    return load("decrement.pw")


@pytest.fixture
def countprimes():
    return load("countprimes.pw")


@pytest.fixture
def rng():
    return np.random.default_rng(20131)


def space_of(program):
    return StateSpace(program.decls)


# One line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
