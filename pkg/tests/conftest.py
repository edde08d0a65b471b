import numpy as np
import pytest

from elastofds.dense_solver import solve_conv
from elastofds.fds import FastDirectSolver
from elastofds.geometry import BoundaryCurve, ClusterTree, build_mesh, circle_mesh
from elastofds.medium import IncidentWave, default_medium


@pytest.fixture(scope="session")
def medium():
    return default_medium(2.0)


@pytest.fixture(scope="session")
def wave():
    return IncidentWave()


@pytest.fixture(scope="session")
def star400():
    return build_mesh(BoundaryCurve(), 400)


@pytest.fixture(scope="session")
def circle64():
    return circle_mesh(64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def conv400(star400, medium, wave):
    """Dense Burton-Miller solution at N = 400."""
    return solve_conv(star400, medium, wave, ClusterTree(400, 2)).solution[..., 0]


@pytest.fixture(scope="session")
def fds400(star400, medium):
    """Factored solver at N = 400, L = 2, ell0 = 1, eps = 1e-10."""
    solver = FastDirectSolver(star400, medium, 2, 1, 1e-10)
    solver.factor()
    return solver
