import math

import numpy as np
import pytest

from oseenvb import adapt, mesh as msh, oseen, postprocess, space, verify
from oseenvb.space import quadrature_rule


def make_solution(mesh, k, omega_coeffs=None, p_coeffs=None):
    zh = space.build_space(mesh, k)
    qh = space.build_space(mesh, k)
    w = space.DiscreteField(zh, omega_coeffs if omega_coeffs is not None
                            else np.zeros(zh.dof_count))
    p = space.DiscreteField(qh, p_coeffs if p_coeffs is not None
                            else np.zeros(qh.dof_count))
    return oseen.OseenSolution(w, p, None, 0.0)


def test_direct_zero(two_tri_mesh):
    prob = oseen.OseenProblem(nu=1.0, sigma=1.0)
    sol = make_solution(two_tri_mesh, 1)
    u = postprocess.recover_direct(prob, sol)
    assert np.abs(u.coeffs).max() == 0.0


def test_direct_constant_force(two_tri_mesh):
    c = (2.0, -3.0)
    prob = oseen.OseenProblem(
        nu=1.0, sigma=4.0, f=lambda pts: np.tile(c, (len(np.atleast_2d(pts)), 1))
    )
    for k in (1, 2):
        sol = make_solution(two_tri_mesh, k)
        u = postprocess.recover_direct(prob, sol)
        assert np.allclose(u.coeffs[..., 0], c[0] / 4.0, atol=1e-14)
        assert np.allclose(u.coeffs[..., 1], c[1] / 4.0, atol=1e-14)


def test_direct_linearity(unit_square_16):
    """recover_direct is linear in (f, omega_h, p_h)."""
    rng = np.random.default_rng(9)
    mesh = unit_square_16
    k = 2
    zh = space.build_space(mesh, k)

    def rand_f(seed):
        coef = np.random.default_rng(seed).standard_normal(4)
        return lambda pts: np.column_stack([
            coef[0] + coef[1] * pts[:, 0], coef[2] + coef[3] * pts[:, 1] ** 2
        ])

    beta = lambda pts: np.column_stack([pts[:, 1], -pts[:, 0]])
    w1 = rng.standard_normal(zh.dof_count)
    w2 = rng.standard_normal(zh.dof_count)
    p1 = rng.standard_normal(zh.dof_count)
    p2 = rng.standard_normal(zh.dof_count)
    f1, f2 = rand_f(1), rand_f(2)
    f12 = lambda pts: f1(pts) + f2(pts)

    prob1 = oseen.OseenProblem(nu=0.5, sigma=2.0, beta=beta, f=f1)
    prob2 = oseen.OseenProblem(nu=0.5, sigma=2.0, beta=beta, f=f2)
    prob12 = oseen.OseenProblem(nu=0.5, sigma=2.0, beta=beta, f=f12)
    u1 = postprocess.recover_direct(prob1, make_solution(mesh, k, w1, p1))
    u2 = postprocess.recover_direct(prob2, make_solution(mesh, k, w2, p2))
    u12 = postprocess.recover_direct(prob12, make_solution(mesh, k, w1 + w2, p1 + p2))
    assert np.abs(u12.coeffs - (u1.coeffs + u2.coeffs)).max() <= 1e-12


def test_elliptic_zero(unit_square_16):
    prob = oseen.OseenProblem(nu=1.0, sigma=1.0)
    sol = make_solution(unit_square_16, 1)
    Uh = space.build_space(unit_square_16, 1, 2)
    zero = lambda pts: np.zeros((len(np.atleast_2d(pts)), 2))
    u = postprocess.recover_elliptic(prob, sol, Uh, dirichlet=zero)
    assert np.abs(u.coeffs).max() <= 1e-12


def test_elliptic_requires_dirichlet_set():
    verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
    mesh = msh.TriMesh(verts, [(0, 1, 2)],
                       [(0, 1, 2), (1, 2, 2), (2, 0, 2)])  # all Gamma_2
    prob = oseen.OseenProblem(nu=1.0, sigma=1.0)
    sol = make_solution(mesh, 1)
    Uh = space.build_space(mesh, 1, 2)
    # tangential-only constraints everywhere leave the normal field loose but
    # the solve path must at least run its singularity checks
    try:
        postprocess.recover_elliptic(prob, sol, Uh,
                                     tangential=lambda pts: np.zeros((len(pts), 2)))
    except oseen.SolverError:
        pass  # acceptable: system detected as singular


def test_elliptic_stability_inequality(ex1_coarse_solution, cases):
    """nu |rot u|^2 + nu |div u|^2 <= |w| * sqrt(nu) |rot u|."""
    b = ex1_coarse_solution
    case = cases["ex1"]
    mesh = b.mesh
    nu = case.nu
    rule = quadrature_rule(6)
    cells = np.arange(mesh.num_triangles)
    g = b.u_elliptic.grad_cells(cells, rule.bary)   # (nc,nq,2,2)
    rot = g[..., 1, 0] - g[..., 0, 1]
    div = g[..., 0, 0] + g[..., 1, 1]
    _, det, _ = mesh.jacobians()
    wdet = rule.weights[None, :] * det[:, None]
    rot2 = float(np.einsum("tq,tq->", wdet, rot ** 2))
    div2 = float(np.einsum("tq,tq->", wdet, div ** 2))
    wvals = b.sol.omega_h.eval_cells(cells, rule.bary)
    w2 = float(np.einsum("tq,tq->", wdet, wvals ** 2))
    lhs = nu * rot2 + nu * div2
    rhs = math.sqrt(w2) * math.sqrt(nu) * math.sqrt(rot2)
    # discrete stability: energy bounded by the vorticity pairing; the
    # inhomogeneous boundary lift adds a small slack
    assert lhs <= rhs * (1 + 1e-6) + 1e-12


def test_divergence_decay_under_refinement(cases):
    """|div u_tilde| decays at rate >= k - 0.2 in Example 1."""
    case = cases["ex1"]
    k = 1
    mesh = case.domain(4)
    divs = []
    for _ in range(3):
        b = adapt.solve_case_on_mesh(case, mesh, k)
        rule = quadrature_rule(6)
        cells = np.arange(mesh.num_triangles)
        g = b.u_elliptic.grad_cells(cells, rule.bary)
        div = g[..., 0, 0] + g[..., 1, 1]
        _, det, _ = mesh.jacobians()
        wdet = rule.weights[None, :] * det[:, None]
        divs.append(math.sqrt(float(np.einsum("tq,tq->", wdet, div ** 2))))
        mesh = msh.refine_uniform(mesh)
    rate = math.log(divs[0] / divs[-1]) / math.log(4)
    assert rate >= k - 0.2


def test_direct_recovery_rate_example1(cases):
    """|u - u_h| decays at ~1 for k=1 (accepted band 0.75..1.3)."""
    case = cases["ex1"]
    rep = adapt.uniform_study(case, 1, 4)
    rate = rep.tail_rate("err_u_direct", n=2)
    assert 0.75 <= rate <= 1.3


def test_broken_field_eval(two_tri_mesh):
    coeffs = np.zeros((2, 1, 2))
    coeffs[0, 0] = (1.0, 2.0)
    coeffs[1, 0] = (3.0, -1.0)
    f = postprocess.BrokenField(two_tri_mesh, 0, coeffs)
    bary = np.array([[1 / 3, 1 / 3, 1 / 3], [0.2, 0.5, 0.3]])
    vals = f.eval_cells(np.array([0, 1]), bary)
    assert np.allclose(vals[0], (1.0, 2.0))
    assert np.allclose(vals[1], (3.0, -1.0))
    assert np.allclose(f.cell_averages(), coeffs[:, 0, :])
