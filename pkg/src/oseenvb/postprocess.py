"""Velocity recovery from the discrete vorticity / pressure pair.

Two post-processes: the direct element-wise momentum-balance formula
producing a broken degree-(k-1) field, and an auxiliary conforming
rot-rot + div-div solve producing a continuous degree-k field.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import GAMMA1, GAMMA2
from .oseen import SolverError
from .space import (
    DiscreteField,
    eval_basis,
    eval_field,
    lagrange_nodes,
    quadrature_rule,
)


class BrokenField:
    """Element-wise polynomial 2-vector field with no continuity."""

    def __init__(self, mesh, degree, coeffs):
        self.mesh = mesh
        self.degree = degree
        self.coeffs = np.asarray(coeffs, dtype=float)  # (nt, nloc, 2)
        nloc = 1 if degree == 0 else (3 if degree == 1 else 6)
        if self.coeffs.shape != (mesh.num_triangles, nloc, 2):
            raise ValueError("broken-field coefficient shape mismatch")

    def eval_cells(self, cells, bary):
        if self.degree == 0:
            nb = np.atleast_2d(bary)
            return np.broadcast_to(
                self.coeffs[cells][:, None, 0, :], (len(cells), len(nb), 2)
            ).copy()
        vals, _ = eval_basis(self.degree, bary)
        return np.einsum("pl,nlc->npc", vals, self.coeffs[cells])

    def values_on_cells(self, mesh, cells, bary, phys=None):
        if mesh is not self.mesh:
            raise ValueError("field lives on a different mesh")
        return self.eval_cells(cells, bary)

    def cell_averages(self):
        """Mean value per triangle, (nt, 2)."""
        if self.degree == 0:
            return self.coeffs[:, 0, :]
        rule = quadrature_rule(2)
        vals = self.eval_cells(np.arange(self.mesh.num_triangles), rule.bary)
        return np.einsum("q,nqc->nc", rule.weights, vals) / 0.5


def _project_elementwise(mesh, degree, sample):
    """Element-wise L2 projection onto P_degree from pointwise samples.

    sample(cells, bary, phys) -> (nc, nq, 2).  Returns (nt, nloc, 2)
    Lagrange coefficients at the local P_degree nodes.
    """
    cells = np.arange(mesh.num_triangles)
    rule = quadrature_rule(max(2 * degree + 2, 4))
    vals, _ = eval_basis(degree, rule.bary) if degree >= 1 else (
        np.ones((rule.npoints, 1)), None)
    phys = mesh.map_points(cells, rule.bary)
    fv = sample(cells, rule.bary, phys)
    # reference mass matrix scaled by det cancels in the local solve
    Mref = np.einsum("q,qi,qj->ij", rule.weights, vals, vals)
    rhs = np.einsum("q,qi,nqc->nic", rule.weights, vals, fv)
    coef = np.einsum("ij,njc->nic", np.linalg.inv(Mref), rhs)
    if degree == 0:
        return coef
    # convert from the modal solve in the Lagrange basis: already nodal
    return coef


def recover_direct(problem, sol):
    """u_h|_T = sigma^-1 (P_h f - nu^-1/2 P_h(w_h x beta)
    - (sqrt(nu) curl w_h + grad p_h)), element-wise degree k-1."""
    zh = sol.omega_h.space
    mesh = zh.mesh
    k = zh.degree
    deg = k - 1
    sigma, nu = problem.sigma, problem.nu
    sqnu = np.sqrt(nu)

    def f_sample(cells, bary, phys):
        return eval_field(problem.f, mesh, cells, bary, phys)

    def wxb_sample(cells, bary, phys):
        w = sol.omega_h.eval_cells(cells, bary)
        beta = eval_field(problem.beta, mesh, cells, bary, phys)
        return w[..., None] * np.stack([-beta[..., 1], beta[..., 0]], axis=-1)

    pf = _project_elementwise(mesh, deg, f_sample)
    pwxb = _project_elementwise(mesh, deg, wxb_sample)

    # sqrt(nu) curl w_h + grad p_h is an exact degree-(k-1) polynomial per cell
    nodes = lagrange_nodes(deg)
    cells = np.arange(mesh.num_triangles)
    gw = sol.omega_h.grad_cells(cells, nodes)
    gp = sol.p_h.grad_cells(cells, nodes)
    curl_w = np.stack([gw[..., 1], -gw[..., 0]], axis=-1)
    resid = sqnu * curl_w + gp

    coeffs = (pf - pwxb / sqnu - resid) / sigma
    return BrokenField(mesh, deg, coeffs)


def recover_elliptic(problem, sol, Uh, dirichlet=None, tangential=None):
    """Solve nu (rot u, rot v) + nu (div u, div v) = sqrt(nu) (w_h, rot v).

    Dirichlet data: `dirichlet(pts) -> (n,2)` lifted at Gamma_1 nodes
    (defaults to problem.g); on Gamma_2 only the tangential component is
    pinned to `tangential` (defaults to problem.a).  Raises SolverError on
    an empty constraint set (the operator alone is singular).
    """
    mesh = Uh.mesh
    if Uh.components != 2:
        raise ValueError("recovery space must have 2 components")
    if mesh is not sol.omega_h.space.mesh:
        raise ValueError("recovery space must live on the solution mesh")
    k = Uh.degree
    nu = problem.nu
    sqnu = np.sqrt(nu)
    rule = quadrature_rule(2 * k + 2)
    vals, gref = eval_basis(k, rule.bary)
    _, det, invJT = mesh.jacobians()
    g = np.einsum("nde,ple->npld", invJT, gref)
    wdet = rule.weights[None, :] * det[:, None]
    gx, gy = g[..., 0], g[..., 1]

    # block integrands: basis (chi,0) has rot=-chi_y, div=chi_x;
    # (0,chi) has rot=chi_x, div=chi_y.
    k_xx = np.einsum("tq,tqi,tqj->tij", wdet, gy, gy) \
        + np.einsum("tq,tqi,tqj->tij", wdet, gx, gx)
    k_yy = np.einsum("tq,tqi,tqj->tij", wdet, gx, gx) \
        + np.einsum("tq,tqi,tqj->tij", wdet, gy, gy)
    k_xy = -np.einsum("tq,tqi,tqj->tij", wdet, gy, gx) \
        + np.einsum("tq,tqi,tqj->tij", wdet, gx, gy)

    ns = Uh.num_scalar
    d = Uh.cell_scalar_dofs
    nloc = d.shape[1]
    rows, cols, data = [], [], []

    def add(local, roff, coff):
        rows.append((np.repeat(d, nloc, axis=1) + roff).ravel())
        cols.append((np.tile(d, (1, nloc)) + coff).ravel())
        data.append(local.reshape(len(local), -1).ravel())

    add(nu * k_xx, 0, 0)
    add(nu * k_yy, ns, ns)
    add(nu * k_xy, 0, ns)          # test x-block, trial y-block
    add(nu * np.transpose(k_xy, (0, 2, 1)), ns, 0)
    A = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * ns, 2 * ns),
    ).tocsr()
    A.sum_duplicates()

    cells = np.arange(mesh.num_triangles)
    wvals = sol.omega_h.eval_cells(cells, rule.bary)
    rhs = np.zeros(2 * ns)
    rx = -sqnu * np.einsum("tq,tq,tqi->ti", wdet, wvals, gy)
    ry = sqnu * np.einsum("tq,tq,tqi->ti", wdet, wvals, gx)
    np.add.at(rhs, d.ravel(), rx.ravel())
    np.add.at(rhs, (d + ns).ravel(), ry.ravel())

    # constraints
    if dirichlet is None:
        dirichlet = problem.g
    if tangential is None:
        tangential = problem.a
    g1 = Uh.boundary_scalar_dofs(GAMMA1)
    g2 = np.setdiff1d(Uh.boundary_scalar_dofs(GAMMA2), g1)
    if g1.size + g2.size == 0:
        raise SolverError("elliptic recovery needs a nonempty Dirichlet set")

    xc = np.zeros(2 * ns)
    con = []
    if g1.size:
        gv = np.zeros((len(g1), 2))
        if dirichlet is not None:
            gv = np.asarray(dirichlet(Uh.scalar_points[g1]), dtype=float)
        xc[g1] = gv[:, 0]
        xc[g1 + ns] = gv[:, 1]
        con.extend(g1.tolist())
        con.extend((g1 + ns).tolist())
    free_rows = np.ones(2 * ns)
    for dof in con:
        free_rows[dof] = 0.0
    Df = sp.diags(free_rows)
    Dc = sp.diags(1.0 - free_rows)
    rhs = free_rows * (rhs - A @ xc) + (1.0 - free_rows) * xc
    A = (Df @ A @ Df + Dc).tolil()

    if g2.size:
        tang = _node_tangents(Uh, mesh, g2)
        av = np.zeros((len(g2), 2))
        if tangential is not None:
            av = np.asarray(tangential(Uh.scalar_points[g2]), dtype=float)
        tval = np.einsum("nd,nd->n", av, tang)
        for i, s in enumerate(g2):
            tx, ty = tang[i]
            row = int(s) if abs(tx) >= abs(ty) else int(s) + ns
            A.rows[row] = [int(s), int(s) + ns]
            A.data[row] = [tx, ty]
            rhs[row] = tval[i]
    A = A.tocsc()

    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"elliptic recovery factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    bnorm = np.linalg.norm(rhs)
    rel = np.linalg.norm(A @ x - rhs) / (bnorm if bnorm > 0 else 1.0)
    if rel > 1e-10:
        x = x + lu.solve(rhs - A @ x)
        rel = np.linalg.norm(A @ x - rhs) / (bnorm if bnorm > 0 else 1.0)
    if rel > 1e-10 or not np.isfinite(x).all():
        raise SolverError(f"elliptic recovery residual {rel:.3e} exceeds 1e-10")
    return DiscreteField(Uh, x)


def _node_tangents(Uh, mesh, scalar_dofs):
    """Unit tangent at Gamma_2 boundary nodes (averaged over incident edges)."""
    _, t_e = mesh.edge_frames()
    acc = {int(s): np.zeros(2) for s in scalar_dofs}
    nv = mesh.num_vertices
    for eid in mesh.boundary_edges(GAMMA2):
        a, b = mesh.edges[eid]
        for s in (int(a), int(b)):
            if s in acc:
                acc[s] += t_e[eid]
        if Uh.degree == 2:
            s = nv + int(eid)
            if s in acc:
                acc[s] += t_e[eid]
    out = np.empty((len(scalar_dofs), 2))
    for i, s in enumerate(scalar_dofs):
        v = acc[int(s)]
        norm = np.linalg.norm(v)
        out[i] = v / norm if norm > 0 else np.array([1.0, 0.0])
    return out
