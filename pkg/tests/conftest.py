import numpy as np
import pytest

from helpers import ACCEPTANCE, format_line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(format_line(number, *ACCEPTANCE[number]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
