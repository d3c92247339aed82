import numpy as np
import pytest

from votesig.laws import DiscreteLaw

ACCEPTANCE_RESULTS = {}


def record(number: int, title: str, passed: bool, detail: str = ""):
    """Store one acceptance verdict; printed in the terminal summary."""
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])


def random_discrete_law(rng, max_atoms=8, include_half=False):
    k = int(rng.integers(1, max_atoms + 1))
    q = rng.random(k)
    if include_half and rng.random() < 0.3:
        q[0] = 0.5
    w = rng.random(k) + 0.05
    return DiscreteLaw(q, w / w.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
