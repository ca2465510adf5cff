import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sinai_billiards import hexagonal, square  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def hex22():
    return hexagonal(2.2)


@pytest.fixture(scope="session")
def hex215():
    return hexagonal(2.15)


@pytest.fixture(scope="session")
def sq():
    return square(0.25, 0.4)


@pytest.fixture(scope="session")
def census22(hex22):
    from sinai_billiards.orbits import enumerate_fixed_points
    return {n: enumerate_fixed_points(hex22, n) for n in range(2, 9)}


@pytest.fixture(scope="session")
def cells22(hex22):
    from sinai_billiards.singularity import count_cells
    return {n: count_cells(hex22, n) for n in range(1, 7)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


SQRT2_HALF = math.sqrt(2) / 2
