import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from whardy.dyadic import DyadicLattice
from whardy.filters import build_filter_bank
from whardy.grid import Grid

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid1024():
    return Grid(1, 1024)


@pytest.fixture(scope="session")
def bank1024(grid1024):
    return build_filter_bank(grid1024, 6)


@pytest.fixture(scope="session")
def grid256():
    return Grid(1, 256)


@pytest.fixture(scope="session")
def lat256(grid256):
    return DyadicLattice(grid256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2}. {title}: {detail}")
