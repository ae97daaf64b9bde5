import numpy as np
import pytest

from modlevel.bank import CdfBank
from modlevel.signal import qam_family

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def family():
    return qam_family((4, 16, 64))


@pytest.fixture(scope="session")
def bank12():
    return CdfBank.build(snr_grid=[12.0])


@pytest.fixture(scope="session")
def small_bank():
    return CdfBank.build(snr_grid=[6.0, 12.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
