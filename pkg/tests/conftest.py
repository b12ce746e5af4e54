import numpy as np
import pytest

from inertial_pd.problem import ConstrainedProblem, QuadraticObjective, example2_problem, generate_random_qp

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def simple_problem():
    """min |x|^2 / 2  s.t.  x1 + x2 = 2; saddle point x* = (1, 1), lam* = -1."""
    return ConstrainedProblem(QuadraticObjective(np.eye(2), np.zeros(2)), np.array([[1.0, 1.0]]), np.array([2.0]))


@pytest.fixture
def ex2():
    return example2_problem(5, 1, 1)


@pytest.fixture(scope="session")
def random_qp():
    return generate_random_qp(50, 20, 7)
