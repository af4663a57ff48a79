from importlib import resources
from pathlib import Path

import numpy as np
import pytest

SCENARIOS = Path(str(resources.files("adastab") / "scenarios"))
MATRICES = SCENARIOS / "matrices"

A3 = np.array([[1.0, 4, 2], [5, -2, 1], [6, 3, -4]])
B3 = np.array([[7.0, 4, -2], [-4, 6, 3], [2, -2, 5]])
B_EX1 = np.array([[2.0, 3], [-1, -1]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def plant5():
    from adastab.matana import read_matrix

    return read_matrix(MATRICES / "plant5_A.mat"), read_matrix(MATRICES / "plant5_B.mat")


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
