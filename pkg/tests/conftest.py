from __future__ import annotations

import math

import pytest

from robintorsion import fem
from robintorsion.geometry import regular_polygon, unit_square

# unit-square Dirichlet torsion from the classical series, summed to 1e-13
SQUARE_TAU_D = 0.0351442537387884

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disk_polygon():
    return regular_polygon(256)


@pytest.fixture(scope="session")
def disk_study(disk_polygon):
    return fem.study_domain(disk_polygon, 0.2, 3)


@pytest.fixture(scope="session")
def square_study():
    return fem.study_domain(unit_square(), 0.25, 3)


@pytest.fixture(scope="session")
def disk_gap():
    """Geometric error of replacing the unit disk by the inscribed 256-gon."""
    return lambda formula: fem.polygon_gap(256, 1.0, formula)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running refinement or sweep test")


def series_square_torsion(terms: int = 20_001) -> float:
    total = 0.0
    for n in range(1, terms, 2):
        total += math.tanh(n * math.pi / 2) / n**5
    return 1 / 12 - 16 / math.pi**5 * total
