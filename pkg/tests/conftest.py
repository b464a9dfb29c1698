import numpy as np
import pytest

from excloud import SimConfig, simulate, validate

# Lines recorded by the acceptance tests, echoed after the run summary.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def kernel_warm():
    """Force the compiled kernels to load (or build) before timed work."""
    simulate(validate([0.2, 1.0], [1.0, 1.0]), SimConfig(horizon=5.0, seed=0))
    return True


def make_random_rates(rng, max_particles=10, zero_prob=0.15,
                      positive_only=False):
    """One random instance: N+1 in [2, max_particles], rates uniform (0, 2),
    left rates occasionally zeroed unless positive rates are required."""
    n = int(rng.integers(2, max_particles + 1))
    if positive_only:
        a = rng.uniform(0.01, 2.0, n)
    else:
        a = rng.uniform(0.0, 2.0, n)
        a[rng.random(n) < zero_prob] = 0.0
    b = rng.uniform(0.0, 2.0, n)
    b[b < 1e-6] = 1e-6
    return validate(a, b)
