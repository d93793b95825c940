import math

import numpy as np
import pytest

from nilheat.nilmanifold import LatticeParams
from nilheat.numerics import Grid


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end checks that take more than a few seconds")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def lattice():
    return LatticeParams(1, 1)


@pytest.fixture
def lam():
    return 4.0 * math.pi


@pytest.fixture
def line_grid():
    """[-8, 8) with 256 nodes, enough for unit-width Gaussians."""
    return Grid.cube(1, 8.0, 256)
