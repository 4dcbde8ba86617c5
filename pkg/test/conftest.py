import numpy as np
import pytest

from pycmc.delaunay import DelaunayResidue


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: ODE or mesh heavy checks")


@pytest.fixture
def unduloid_residue():
    """a = 3/8, b = 1/8: ν = (−1/3, −3), μ(1) = 1/2, necksizes (1/4, 3/4)."""
    return DelaunayResidue(0.375, 0.125)


@pytest.fixture
def vacuum_residue():
    """a = b = 1/4: the cylinder of radius 1/2."""
    return DelaunayResidue(0.25, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
