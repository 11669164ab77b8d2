"""Residual a posteriori error estimator.

Per triangle T with regularity exponent delta in (0, 1]:

    eta_T^2 = h_T^(2(1+delta)) (|R1|_T^2 + |R2|_T^2)
              + sum_{e in E(T) interior} h_e^(1+2delta) (|[J1.t]|_e^2 + |[J2.n]|_e^2)

with the strong residuals

    R1 = rot(sqrt(nu) curl w_h + nu^-1/2 w_h x beta - f) - nu^-1/2 sigma w_h
    R2 = div(f - nu^-1/2 w_h x beta - grad p_h)

and the flux fields J1 = sqrt(nu) curl w_h + nu^-1/2 w_h x beta - f,
J2 = f - nu^-1/2 w_h x beta - grad p_h.  Interior edges contribute to both
incident triangles; boundary edges contribute nothing.  2D identities used:
rot(curl s) = -lap s and rot(s x b) = div(s b), div(s x b) = curl s . b - s rot b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import (
    eval_basis,
    eval_field,
    gauss_segment,
    quadrature_rule,
    reference_hessians,
)


@dataclass
class EstimatorField:
    eta_sq: np.ndarray      # per triangle
    r1_sq: np.ndarray
    r2_sq: np.ndarray
    jump1_sq: np.ndarray    # edge contributions summed per triangle
    jump2_sq: np.ndarray
    eta: float
    delta: float

    def total_check(self):
        return abs(self.eta ** 2 - self.eta_sq.sum())


def _fd_step(mesh, cells):
    return mesh.h_T[cells] * 1e-6


def _scalar_derivative(fun, mesh, cells, bary, phys, mode):
    """rot or div of a vector callable by central differences."""
    h = _fd_step(mesh, cells)[:, None, None]      # (nc, 1, 1)
    ex = np.zeros_like(phys)
    ex[..., 0:1] = h
    ey = np.zeros_like(phys)
    ey[..., 1:2] = h

    def at(pts):
        flat = pts.reshape(-1, 2)
        return np.asarray(fun(flat), dtype=float).reshape(pts.shape[:2] + (2,))

    dx = (at(phys + ex) - at(phys - ex)) / (2 * h)
    dy = (at(phys + ey) - at(phys - ey)) / (2 * h)
    if not (np.isfinite(dx).all() and np.isfinite(dy).all()):
        raise ValueError("non-finite finite-difference derivative sample")
    if mode == "rot":
        return dx[..., 1] - dy[..., 0]
    return dx[..., 0] + dy[..., 1]


def _data_rot_div(problem, mesh, cells, bary, phys, which):
    """(rot, div) samples of f or beta, preferring closed forms."""
    if which == "f":
        fun, rot_c, div_c = problem.f, problem.rot_f, problem.div_f
    else:
        fun, rot_c, div_c = problem.beta, problem.rot_beta, problem.div_beta
    flat = phys.reshape(-1, 2)
    shape = phys.shape[:2]
    if rot_c is not None:
        rot = np.asarray(rot_c(flat), dtype=float).reshape(shape)
    elif hasattr(fun, "gradients_on_cells"):
        gg = fun.gradients_on_cells(mesh, cells, bary, phys)
        rot = gg[..., 1, 0] - gg[..., 0, 1]
    else:
        rot = _scalar_derivative(fun, mesh, cells, bary, phys, "rot")
    if div_c is not None:
        div = np.asarray(div_c(flat), dtype=float).reshape(shape)
    elif hasattr(fun, "gradients_on_cells"):
        gg = fun.gradients_on_cells(mesh, cells, bary, phys)
        div = gg[..., 0, 0] + gg[..., 1, 1]
    else:
        div = _scalar_derivative(fun, mesh, cells, bary, phys, "div")
    return rot, div


def _laplacians(field, cells):
    """Element-wise Laplacian of a scalar P_k field (constant per cell)."""
    sp = field.space
    H = reference_hessians(sp.degree)  # (nloc, 2, 2)
    _, _, invJT = sp.mesh.jacobians()
    # physical Hessian = invJT @ Href @ invJT^T, constant per cell
    Hp = np.einsum("nab,lbc,ndc->nlad", invJT[cells], H, invJT[cells])
    loc = field.coeffs[sp.cell_scalar_dofs[cells]]
    return np.einsum("nlad,nl->nad", Hp, loc).trace(axis1=1, axis2=2)


def element_residuals(problem, sol, cells, bary):
    """Pointwise R1, R2 samples on the given cells, shape (nc, nq) each."""
    mesh = sol.omega_h.space.mesh
    cells = np.atleast_1d(np.asarray(cells, dtype=np.int64))
    bary = np.atleast_2d(bary)
    phys = mesh.map_points(cells, bary)
    nu, sigma = problem.nu, problem.sigma
    sqnu = np.sqrt(nu)

    w = sol.omega_h.eval_cells(cells, bary)
    gw = sol.omega_h.grad_cells(cells, bary)
    lap_w = _laplacians(sol.omega_h, cells)[:, None]
    lap_p = _laplacians(sol.p_h, cells)[:, None]

    beta = eval_field(problem.beta, mesh, cells, bary, phys)
    rot_b, div_b = _data_rot_div(problem, mesh, cells, bary, phys, "beta")
    rot_f, div_f = _data_rot_div(problem, mesh, cells, bary, phys, "f")

    # R1 = rot(f - sqrt(nu) curl w_h - nu^-1/2 w_h x beta) - nu^-1/2 sigma w_h,
    # the strong vorticity-equation residual (vanishes on exact solutions);
    # rot(curl s) = -lap s and rot(s b) ... rot(s x b) = div(s b).
    adv = np.einsum("nqd,nqd->nq", gw, beta)       # beta . grad w
    r1 = rot_f + sqnu * lap_w - (adv + w * div_b) / sqnu - sigma * w / sqnu
    curlw_dot_b = gw[..., 1] * beta[..., 0] - gw[..., 0] * beta[..., 1]
    r2 = div_f - (curlw_dot_b - w * rot_b) / sqnu - lap_p
    return r1, r2


def _field_at_varying(field, mesh, tris, bary, phys):
    if hasattr(field, "eval_cells_varying"):
        return field.eval_cells_varying(tris, bary)
    if hasattr(field, "values_on_cells_varying"):
        return field.values_on_cells_varying(mesh, tris, bary, phys)
    flat = phys.reshape(-1, 2)
    out = np.asarray(field(flat), dtype=float)
    return out.reshape(phys.shape[:2] + (2,))


def _edge_traces(problem, sol, eids, side, s_pts):
    """J1, J2 samples on the edges as seen from one incident side.

    Shapes (m, ns, 2); side 0 is the lower-indexed triangle.
    """
    mesh = sol.omega_h.space.mesh
    zh = sol.omega_h.space
    tris = mesh.edge_to_tris[eids, side]
    A = mesh.vertices[mesh.edges[eids, 0]]
    B = mesh.vertices[mesh.edges[eids, 1]]
    phys = A[:, None, :] + s_pts[None, :, None] * (B - A)[:, None, :]
    v0 = mesh.vertices[mesh.triangles[tris, 0]]
    _, _, invJT = mesh.jacobians()
    q = phys - v0[:, None, :]
    loc = np.einsum("mqe,med->mqd", q, invJT[tris])
    bary = np.concatenate([1 - loc.sum(-1, keepdims=True), loc], axis=-1)

    w = sol.omega_h.eval_cells_varying(tris, bary)
    gw = sol.omega_h.grad_cells_varying(tris, bary)
    gp = sol.p_h.grad_cells_varying(tris, bary)
    beta = _field_at_varying(problem.beta, mesh, tris, bary, phys)
    fv = _field_at_varying(problem.f, mesh, tris, bary, phys)

    sqnu = np.sqrt(problem.nu)
    curl_w = np.stack([gw[..., 1], -gw[..., 0]], axis=-1)
    wxb = w[..., None] * np.stack([-beta[..., 1], beta[..., 0]], axis=-1)
    j1 = sqnu * curl_w + wxb / sqnu - fv
    j2 = fv - wxb / sqnu - gp
    return j1, j2


def _edge_jump_samples(problem, sol, eids, s_pts):
    j1a, j2a = _edge_traces(problem, sol, eids, 0, s_pts)
    j1b, j2b = _edge_traces(problem, sol, eids, 1, s_pts)
    normals, tangents = sol.omega_h.space.mesh.edge_frames()
    n = normals[eids]
    t = tangents[eids]
    j1_t = np.einsum("msd,md->ms", j1a - j1b, t)
    j2_n = np.einsum("msd,md->ms", j2a - j2b, n)
    return j1_t, j2_n


def edge_jumps(problem, sol, eid):
    """Tangential jump of J1 and normal jump of J2 across an interior edge.

    Returns (s_pts, weights*|e|, J1_t, J2_n) sampled along the edge; the
    jump is (trace from the lower-indexed triangle) minus (trace from the
    higher-indexed one), matching the canonical normal.
    """
    mesh = sol.omega_h.space.mesh
    t1, t2 = mesh.edge_to_tris[eid]
    if t2 < 0:
        raise ValueError(f"edge {eid} is a boundary edge; jumps are interior-only")
    k = sol.omega_h.space.degree
    s_pts, s_wts = gauss_segment(2 * k + 4)
    eids = np.array([eid], dtype=np.int64)
    j1_t, j2_n = _edge_jump_samples(problem, sol, eids, s_pts)
    return s_pts, s_wts * mesh.h_e[eid], j1_t[0], j2_n[0]


def estimate(problem, sol, delta=None):
    """Local indicators and the global estimator eta."""
    mesh = sol.omega_h.space.mesh
    k = sol.omega_h.space.degree
    if delta is None:
        delta = problem.delta
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")

    rule = quadrature_rule(2 * k + 4 if 2 * k + 4 <= 8 else 8)
    cells = np.arange(mesh.num_triangles)
    r1, r2 = element_residuals(problem, sol, cells, rule.bary)
    _, det, _ = mesh.jacobians()
    wdet = rule.weights[None, :] * det[:, None]
    r1_sq = np.einsum("tq,tq->t", wdet, r1 ** 2)
    r2_sq = np.einsum("tq,tq->t", wdet, r2 ** 2)

    ne = mesh.num_edges
    e_j1 = np.zeros(ne)
    e_j2 = np.zeros(ne)
    interior = mesh.interior_edges()
    if interior.size:
        s_pts, s_wts = gauss_segment(2 * k + 4)
        j1_t, j2_n = _edge_jump_samples(problem, sol, interior, s_pts)
        wline = s_wts[None, :] * mesh.h_e[interior, None]
        e_j1[interior] = (wline * j1_t ** 2).sum(axis=1)
        e_j2[interior] = (wline * j2_n ** 2).sum(axis=1)

    hpow_e = mesh.h_e ** (1.0 + 2.0 * delta)
    jump1 = np.zeros(mesh.num_triangles)
    jump2 = np.zeros(mesh.num_triangles)
    for j in range(3):
        eids = mesh.tri_to_edges[:, j]
        inner = mesh.edge_to_tris[eids, 1] >= 0
        jump1 += np.where(inner, hpow_e[eids] * e_j1[eids], 0.0)
        jump2 += np.where(inner, hpow_e[eids] * e_j2[eids], 0.0)

    hpow_t = mesh.h_T ** (2.0 * (1.0 + delta))
    eta_sq = hpow_t * (r1_sq + r2_sq) + jump1 + jump2
    return EstimatorField(
        eta_sq=eta_sq,
        r1_sq=r1_sq,
        r2_sq=r2_sq,
        jump1_sq=jump1,
        jump2_sq=jump2,
        eta=float(np.sqrt(eta_sq.sum())),
        delta=float(delta),
    )


def eta_local(problem, sol, tri, delta=None):
    """Indicator record for one triangle (volume and edge parts)."""
    full = estimate(problem, sol, delta)
    return {
        "eta_sq": float(full.eta_sq[tri]),
        "r1_sq": float(full.r1_sq[tri]),
        "r2_sq": float(full.r2_sq[tri]),
        "jump1_sq": float(full.jump1_sq[tri]),
        "jump2_sq": float(full.jump2_sq[tri]),
    }


def eta_global(eta_sq):
    return float(np.sqrt(np.asarray(eta_sq).sum()))


def effectivity(err_l2_weighted, err_v_weighted, eta):
    """eff1 = |(sigma^1/2 e_w, e_p)|_0 / eta, eff2 = |h^delta e|_V / eta."""
    if eta <= 0:
        if err_l2_weighted > 0 or err_v_weighted > 0:
            raise ValueError("eta = 0 with nonzero error")
        return 0.0, 0.0
    return err_l2_weighted / eta, err_v_weighted / eta


def oscillation(problem, mesh, ell, delta):
    """Data oscillation: h^(2(1+delta)) (|rot f - P_ell rot f|^2 + div analog)."""
    rule = quadrature_rule(8)
    cells = np.arange(mesh.num_triangles)
    phys = mesh.map_points(cells, rule.bary)
    rot_f, div_f = _data_rot_div(problem, mesh, cells, rule.bary, phys, "f")
    _, det, _ = mesh.jacobians()
    wdet = rule.weights[None, :] * det[:, None]

    if ell <= 2:
        vals, _ = eval_basis(max(ell, 1), rule.bary)
        if ell == 0:
            vals = np.ones((rule.npoints, 1))
    else:
        raise ValueError("projection degree above 2 not supported")
    Mref = np.einsum("q,qi,qj->ij", rule.weights, vals, vals)
    Minv = np.linalg.inv(Mref)

    out = np.zeros(mesh.num_triangles)
    for comp in (rot_f, div_f):
        rhs = np.einsum("q,qi,tq->ti", rule.weights, vals, comp)
        coef = rhs @ Minv.T
        proj = np.einsum("ti,qi->tq", coef, vals)
        out += np.einsum("tq,tq->t", wdet, (comp - proj) ** 2)
    return mesh.h_T ** (2.0 * (1.0 + delta)) * out
