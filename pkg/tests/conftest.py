import numpy as np
import pytest

from exttraj.core import TargetState
from exttraj.models import build_model

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def model():
    return build_model()


def make_state(px=0.0, py=0.0, vx=1.0, vy=0.5, theta=0.3, l1=40.0, l2=30.0,
               pr=(25.0, 25.0, 4.0, 4.0), ps=(0.05, 4.0, 4.0)):
    return TargetState.from_parts([px, py, vx, vy], [theta, l1, l2], np.diag(pr), np.diag(ps))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
