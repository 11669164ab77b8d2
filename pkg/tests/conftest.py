import numpy as np
import pytest

from oseenvb import mesh as msh
from oseenvb import oseen, space, verify


@pytest.fixture(scope="session")
def two_tri_mesh():
    return msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 1)


@pytest.fixture(scope="session")
def eight_tri_mesh():
    return msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 2)


@pytest.fixture(scope="session")
def unit_square_16():
    return msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 4)


@pytest.fixture(scope="session")
def cases():
    return {name: verify.case(name) for name in ("ex1", "ex2a", "ex2b", "ex2c")}


@pytest.fixture(scope="session")
def ex1_coarse_solution(cases):
    """Solved ex1 on the 4x4 start mesh with both recoveries."""
    from oseenvb import adapt

    case = cases["ex1"]
    mesh = case.domain(4)
    return adapt.solve_case_on_mesh(case, mesh, 1)


def poly_beta(pts):
    pts = np.atleast_2d(pts)
    return np.column_stack([0.3 + pts[:, 0], 0.1 * pts[:, 0] * pts[:, 1]])


def poly_f(pts):
    pts = np.atleast_2d(pts)
    return np.column_stack([pts[:, 0] ** 2, pts[:, 1] - pts[:, 0]])


def poly_g(pts):
    pts = np.atleast_2d(pts)
    return np.column_stack([pts[:, 1] ** 2, pts[:, 0]])
