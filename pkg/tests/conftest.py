import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def random_spd(rng, d, cond_floor=0.1):
    a = rng.standard_normal((d, d))
    return a @ a.T / d + cond_floor * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
