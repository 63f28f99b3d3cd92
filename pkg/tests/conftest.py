import numpy as np
import pytest

from robustavg.mdp import MdpModel

_ACCEPTANCE_LINES: list[str] = []


def single_action_model(kernel_rows, rewards):
    """Model with one action per state built from ``[s][s']`` rows and ``[s]`` rewards."""
    P = np.asarray(kernel_rows, dtype=float)
    r = np.asarray(rewards, dtype=float)
    return MdpModel(P[:, None, :], r[:, None])


@pytest.fixture
def cycle():
    """Deterministic 2-state cycle with rewards (0, 1)."""
    return single_action_model([[0.0, 1.0], [1.0, 0.0]], [0.0, 1.0])


@pytest.fixture
def smoothed_chain():
    """Rows (0.1, 0.9) / (0.9, 0.1), rewards (0, 1)."""
    return single_action_model([[0.1, 0.9], [0.9, 0.1]], [0.0, 1.0])


@pytest.fixture
def one_state():
    return single_action_model([[1.0]], [0.7])


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
