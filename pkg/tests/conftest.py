import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rotstrat.spectral import PhysicalParams, TorusGrid, leray_project, random_field

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


@pytest.fixture(scope="session")
def grid16():
    return TorusGrid(16, 2 * np.pi * 2)


@pytest.fixture(scope="session")
def grid32():
    return TorusGrid(32, 16 * np.pi)


@pytest.fixture
def params():
    return PhysicalParams(epsilon=0.1, nu=0.1, froude=2.0)


def random_state(grid, seed, **kwargs):
    return leray_project(random_field(grid, 4, np.random.default_rng(seed), **kwargs), grid)


def rel(a, b):
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number, title, checks, detail=""):
    """Store and print the verdict, then fail the calling test on any failed check."""
    failed = [name for name, ok in checks.items() if not ok]
    line = f"criterion {number:2d} {'PASS' if not failed else 'FAIL'}  {title}  {detail}".rstrip()
    if failed:
        line += f"  [failed: {', '.join(failed)}]"
    ACCEPTANCE[number] = line
    print(line)
    assert not failed, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
