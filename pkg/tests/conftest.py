import numpy as np
import pytest
from hypothesis import settings, strategies as st

from macflow.macgrid import random_grid

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def grid_from_seed(seed, dim=2, max_cells=8):
    rng = np.random.default_rng(seed)
    return random_grid(rng, dim, max_cells=max_cells), rng


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
