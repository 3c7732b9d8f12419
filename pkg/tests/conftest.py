import numpy as np
import pytest

from sparsepg.experiments import Y_D_FUNCTIONS
from sparsepg.mesh import build_mesh, interpolate_nodes
from sparsepg.pde import ReducedProblem


@pytest.fixture(scope="session")
def mesh16():
    return build_mesh(16)


@pytest.fixture(scope="session")
def mesh24():
    return build_mesh(24)


def make_problem(n, y_d="example1", equation="linear", solver="lu"):
    mesh = build_mesh(n)
    nodal = interpolate_nodes(mesh, Y_D_FUNCTIONS[y_d])
    return mesh, ReducedProblem(mesh, nodal, equation=equation, solver=solver)


@pytest.fixture(scope="session")
def problem16():
    return make_problem(16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
