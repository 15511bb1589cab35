import numpy as np
import pytest

from qarrival.core import GaussianPacketSpec, Grid1D, make_gaussian


@pytest.fixture(scope="session")
def std_spec():
    return GaussianPacketSpec(10.0, -2.0, 1.0)


@pytest.fixture(scope="session")
def std_grid():
    return Grid1D(-50.0, 50.0, 4096)


@pytest.fixture(scope="session")
def std_packet(std_spec, std_grid):
    return make_gaussian(std_spec, std_grid)


@pytest.fixture(scope="session")
def wide_grid():
    """Roomy grid for runs that free-evolve out to tau ~ 15."""
    return Grid1D(-80.0, 80.0, 8192)


@pytest.fixture(scope="session")
def wide_packet(std_spec, wide_grid):
    return make_gaussian(std_spec, wide_grid)


def l2_distance(a, b, dx):
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * dx))
