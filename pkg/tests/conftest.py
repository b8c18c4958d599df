import numpy as np
import pytest

from minreg.network import ReactionPair
from minreg.region import build_region

NETWORK2 = ReactionPair((0, 1), (2, 0), (1, 0), (0, 2))  # Y <=> 2X, X <=> 2Y
CASE_V = ReactionPair((2, 0), (0, 1), (0, 0), (1, 1))  # 2X <=> Y, 0 <=> X + Y
DOUBLE_EIG = ReactionPair((0, 0), (1, 1), (2, 0), (1, 2))  # double eigenvalue near eps = 1/sqrt(2)


@pytest.fixture(scope="session")
def network2():
    return NETWORK2


@pytest.fixture(scope="session")
def case_v():
    return CASE_V


@pytest.fixture(scope="session")
def region2():
    return build_region(NETWORK2, 0.5)


@pytest.fixture(scope="session")
def region_v():
    return build_region(CASE_V, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    """Store and print one acceptance line; returns ``passed`` for the caller's assert."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
