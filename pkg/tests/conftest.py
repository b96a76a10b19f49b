import numpy as np
import pytest

from rlab.spectral import PHYSICAL, Field, make_grid


@pytest.fixture(scope="session")
def grid16():
    return make_grid(16, 32.0)


@pytest.fixture(scope="session")
def grid8():
    return make_grid(8, 16.0)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, PHYSICAL, data)
