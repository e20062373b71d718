import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from skipfree.presets import random_model, random_weight

settings.register_profile(
    "default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def corpus_member(seed, n_max=30, killing=None):
    """A random model, weight and level from one integer seed."""
    rng = np.random.default_rng(seed)
    N = int(rng.integers(3, n_max + 1))
    kill = bool(rng.random() < 0.5) if killing is None else killing
    return random_model(rng, N, killing=kill), random_weight(rng, N), N


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
