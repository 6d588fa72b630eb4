import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from quadrep.quadform import Box, QuadraticForm, diagonalize  # noqa: E402

SQUARES = ((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 2, 0), (0, 0, 0, 2))
# A4 root lattice Gram matrix: cross terms, one block, det 5
A4 = ((2, 1, 0, 0), (1, 2, 1, 0), (0, 1, 2, 1), (0, 0, 1, 2))
# hyperbolic plane plus x^2 - y^2: indefinite, det 4
INDEF = ((0, 1, 0, 0), (1, 0, 0, 0), (0, 0, 2, 0), (0, 0, 0, -2))


@pytest.fixture(scope="session")
def squares():
    return QuadraticForm(SQUARES)


@pytest.fixture(scope="session")
def a4():
    return QuadraticForm(A4)


@pytest.fixture(scope="session")
def indef():
    return QuadraticForm(INDEF)


@pytest.fixture(scope="session")
def squares_diag(squares):
    return diagonalize(squares)


@pytest.fixture(scope="session")
def cube2():
    return Box.cube(4, 2.0)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[num])
