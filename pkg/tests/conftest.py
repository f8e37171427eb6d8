import numpy as np
import pytest
from hypothesis import settings

from gevreylab.grid import build_grid
from gevreylab.params import Params
from gevreylab.profiles import make_shear_heat_profile, make_zero_profile

settings.register_profile("suite", deadline=None, max_examples=25)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def params():
    return Params(nu=1.0 / 16, K=64.0)


@pytest.fixture(scope="session")
def grid(params):
    return build_grid(params, n_x=8, n_y=65, y_max=12.0,
                      dt=params.tau_end / 48)


@pytest.fixture(scope="session")
def shear_profile(params, grid):
    return make_shear_heat_profile(params, grid)


@pytest.fixture(scope="session")
def zero_profile(grid):
    return make_zero_profile(grid)


@pytest.fixture(scope="session")
def wall_compatible_phi0(grid):
    """Streamfunction data with phi, dY phi and Delta phi vanishing at
    the wall; compatible initial data keeps time discretization errors
    clean of corner singularities."""
    y = grid.y_nodes
    phi0 = np.zeros((grid.n_x, grid.n_y), complex)
    base = y ** 3 * np.exp(-y)
    phi0[1] = (0.3 + 0.15j) * base
    phi0[2] = 0.1 * base
    phi0[grid.n_x - 1] = np.conj(phi0[1])
    return phi0
