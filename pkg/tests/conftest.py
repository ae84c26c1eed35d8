import numpy as np
import pytest
from hypothesis import settings

from qsdkit.chain import example_chain, random_chain

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def s2():
    return example_chain("S2")


@pytest.fixture(scope="session")
def a2():
    return example_chain("A2")


def chains(count, seed=1234, d_max=8):
    """A reproducible list of random irreducible chains with 2 <= d <= d_max."""
    rng = np.random.default_rng(seed)
    return [random_chain(rng, int(rng.integers(2, d_max + 1))) for _ in range(count)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
