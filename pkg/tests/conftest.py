import logging

import numpy as np
import pytest

logging.getLogger("numba").setLevel(logging.WARNING)

ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    """Record one acceptance result line (echoed in the terminal summary)."""
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
