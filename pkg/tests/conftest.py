import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from testspaces import make_classical, make_fig1, make_process

BUILTIN_SPACES = (
    [(f"classical({d})", make_classical(d)) for d in range(1, 6)]
    + [(f"process({d},{k})", make_process(d, k)) for d in range(1, 4) for k in range(1, 4)]
    + [("fig1", make_fig1())]
)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def fig1():
    return make_fig1()


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_record():
    return _ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
