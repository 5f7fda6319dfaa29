import numpy as np
import pytest
from hypothesis import settings

from ofdma_rra.core import Instance

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


def random_instance(rng, n_max=8, k_max=4, cbr_max=2, integer=False):
    """Small random instance with a target that is usually reachable."""
    n = int(rng.integers(1, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    k1 = int(rng.integers(0, min(cbr_max, k) + 1))
    if integer:
        rates = rng.integers(0, 7, size=(n, k)).astype(float)
    else:
        rates = np.round(rng.uniform(0, 6, size=(n, k)), 3)
    if k1:
        cap = rates[:, :k1].sum(axis=0)
        targets = np.maximum(0.5, rng.uniform(0.1, 0.7) * cap / max(k1, 1))
    else:
        targets = []
    return Instance.from_rates(rates, targets)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Log one PASS/FAIL line per acceptance criterion; shown in the summary."""

    def _record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
