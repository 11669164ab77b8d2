"""Manufactured solutions, error norms, convergence rates and the
independent dense-assembly oracle.

All four built-in cases have a stream function separable as
phi(x, y) = F(x) * G(y); velocity is u = curl phi = (F G', -F' G) and the
scaled vorticity w = sqrt(nu) rot u = -sqrt(nu) (F'' G + F G'').  Closed
forms of the data derivatives needed by the error estimator (rot f, div f,
rot beta, div beta) follow from the univariate derivatives of F and G up
to fourth order, which each case hard-codes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import mesh as msh
from .oseen import OseenProblem
from .space import eval_basis, quadrature_rule


# -- univariate factors with derivatives up to order 4 -------------------------


class Poly:
    """Polynomial factor given by coefficients (ascending powers)."""

    def __init__(self, coeffs):
        self.c = [np.polynomial.Polynomial(coeffs)]
        for _ in range(4):
            self.c.append(self.c[-1].deriv())

    def __call__(self, t, n=0):
        return self.c[n](t)


class ExpWell:
    """exp(-a (t - c)^2) with Hermite-style derivative prefactors."""

    def __init__(self, a, c):
        self.a = a
        self.c = c

    def __call__(self, t, n=0):
        a, u = self.a, np.asarray(t) - self.c
        e = np.exp(-a * u * u)
        if n == 0:
            return e
        if n == 1:
            return -2 * a * u * e
        if n == 2:
            return (4 * a ** 2 * u ** 2 - 2 * a) * e
        if n == 3:
            return (-8 * a ** 3 * u ** 3 + 12 * a ** 2 * u) * e
        if n == 4:
            return (16 * a ** 4 * u ** 4 - 48 * a ** 3 * u ** 2 + 12 * a ** 2) * e
        raise ValueError(n)


class TanhStep:
    """1 + tanh(s (t - c)); derivatives via q = 1 - tanh^2."""

    def __init__(self, s, c):
        self.s = s
        self.c = c

    def __call__(self, t, n=0):
        s = self.s
        th = np.tanh(s * (np.asarray(t) - self.c))
        q = 1.0 - th * th
        if n == 0:
            return 1.0 + th
        if n == 1:
            return s * q
        if n == 2:
            return -2 * s ** 2 * th * q
        if n == 3:
            return -2 * s ** 3 * q * (q - 2 * th * th)
        if n == 4:
            return -8 * s ** 4 * th * q * (th * th - 2 * q)
        raise ValueError(n)


class Product:
    """Leibniz product of two factors."""

    def __init__(self, f, g):
        self.f = f
        self.g = g

    def __call__(self, t, n=0):
        return sum(
            math.comb(n, k) * self.f(t, k) * self.g(t, n - k) for k in range(n + 1)
        )


class ExpIdent:
    """exp(t - 1) - t and its derivatives."""

    def __call__(self, t, n=0):
        t = np.asarray(t)
        e = np.exp(t - 1.0)
        if n == 0:
            return e - t
        if n == 1:
            return e - 1.0
        return e


class SinSq:
    """sin(pi t)^2 and its derivatives."""

    def __call__(self, t, n=0):
        t = np.asarray(t)
        if n == 0:
            return np.sin(np.pi * t) ** 2
        if n == 1:
            return np.pi * np.sin(2 * np.pi * t)
        if n == 2:
            return 2 * np.pi ** 2 * np.cos(2 * np.pi * t)
        if n == 3:
            return -4 * np.pi ** 3 * np.sin(2 * np.pi * t)
        if n == 4:
            return -8 * np.pi ** 4 * np.cos(2 * np.pi * t)
        raise ValueError(n)


# -- manufactured case ----------------------------------------------------------


@dataclass
class ManufacturedCase:
    """Closed-form exact solution with all derivatives the solver needs."""

    name: str
    nu: float
    sigma: float
    delta: float
    domain: Callable            # n -> TriMesh
    initial_n: int
    multiplier: bool            # Gamma_2 empty?
    omega: Callable
    grad_omega: Callable
    p: Callable
    grad_p: Callable
    u: Callable
    beta: Callable
    rot_beta: Callable
    div_beta: Callable
    f: Callable
    rot_f: Callable
    div_f: Callable
    g: Optional[Callable] = None
    a: Optional[Callable] = None
    p0: Optional[Callable] = None

    def problem(self, delta=None):
        return OseenProblem(
            nu=self.nu,
            sigma=self.sigma,
            beta=self.beta,
            f=self.f,
            g=self.g,
            a=self.a,
            p0=self.p0,
            delta=self.delta if delta is None else delta,
            rot_f=self.rot_f,
            div_f=self.div_f,
            rot_beta=self.rot_beta,
            div_beta=self.div_beta,
        )

    def consistency_residuals(self, pts):
        """Momentum, constitutive and mass residuals at the given points.

        Returns (|f - (sigma u + sqrt(nu) curl w + w x beta / sqrt(nu)
        + grad p)|, |w - sqrt(nu) rot u| via closed forms, |div u|).
        """
        nu = self.nu
        u = self.u(pts)
        w = self.omega(pts)
        gw = self.grad_omega(pts)
        gp = self.grad_p(pts)
        beta = self.beta(pts)
        curl_w = np.stack([gw[:, 1], -gw[:, 0]], axis=-1)
        wxb = w[:, None] * np.stack([-beta[:, 1], beta[:, 0]], axis=-1)
        mom = self.f(pts) - (
            self.sigma * u + math.sqrt(nu) * curl_w + wxb / math.sqrt(nu) + gp
        )
        return np.linalg.norm(mom, axis=1)


def _separable_case(name, F, G, nu, sigma, delta, domain, initial_n,
                    p_parts, beta_parts=None, multiplier=True,
                    gamma2=None):
    """Assemble a ManufacturedCase from separable factors.

    p_parts = (p, grad_p, lap_p) closures.  beta_parts overrides the
    default beta = u (supplies beta, rot_beta, div_beta closures).
    """
    sq = math.sqrt(nu)

    def split(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return pts[:, 0], pts[:, 1]

    def u(pts):
        x, y = split(pts)
        return np.column_stack([F(x) * G(y, 1), -F(x, 1) * G(y)])

    def rot_u(x, y):
        return -(F(x, 2) * G(y) + F(x) * G(y, 2))

    def omega(pts):
        x, y = split(pts)
        return sq * rot_u(x, y)

    def grad_omega(pts):
        x, y = split(pts)
        gx = -sq * (F(x, 3) * G(y) + F(x, 1) * G(y, 2))
        gy = -sq * (F(x, 2) * G(y, 1) + F(x) * G(y, 3))
        return np.column_stack([gx, gy])

    def lap_omega(x, y):
        return -sq * (F(x, 4) * G(y) + 2 * F(x, 2) * G(y, 2) + F(x) * G(y, 4))

    p_fun, grad_p, lap_p = p_parts

    if beta_parts is None:
        beta = u

        def rot_beta(pts):
            x, y = split(pts)
            return rot_u(x, y)

        def div_beta(pts):
            x, y = split(pts)
            return np.zeros_like(x)
    else:
        beta, rot_beta, div_beta = beta_parts

    def f(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = omega(pts)
        gw = grad_omega(pts)
        b = beta(pts)
        curl_w = np.stack([gw[:, 1], -gw[:, 0]], axis=-1)
        wxb = w[:, None] * np.stack([-b[:, 1], b[:, 0]], axis=-1)
        return sigma * u(pts) + sq * curl_w + wxb / sq + grad_p(pts)

    def rot_f(pts):
        # rot f = sigma rot u - sqrt(nu) lap w + (grad w . beta + w div beta)/sqrt(nu)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = split(pts)
        gw = grad_omega(pts)
        b = beta(pts)
        adv = gw[:, 0] * b[:, 0] + gw[:, 1] * b[:, 1]
        return (
            sigma * rot_u(x, y)
            - sq * lap_omega(x, y)
            + (adv + omega(pts) * div_beta(pts)) / sq
        )

    def div_f(pts):
        # div f = (curl w . beta - w rot beta)/sqrt(nu) + lap p  (div u = 0)
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        gw = grad_omega(pts)
        b = beta(pts)
        curlw_b = gw[:, 1] * b[:, 0] - gw[:, 0] * b[:, 1]
        return (curlw_b - omega(pts) * rot_beta(pts)) / sq + lap_p(pts)

    case = ManufacturedCase(
        name=name,
        nu=nu,
        sigma=sigma,
        delta=delta,
        domain=domain,
        initial_n=initial_n,
        multiplier=multiplier,
        omega=omega,
        grad_omega=grad_omega,
        p=p_fun,
        grad_p=grad_p,
        u=u,
        beta=beta,
        rot_beta=rot_beta,
        div_beta=div_beta,
        f=f,
        rot_f=rot_f,
        div_f=div_f,
        g=u,
        a=u if gamma2 else None,
        p0=p_fun if gamma2 else None,
    )
    return case


def _quartic_bump():
    # t^2 (1-t)^2 = t^4 - 2 t^3 + t^2
    return Poly([0.0, 0.0, 1.0, -2.0, 1.0])


def _case_ex1():
    nu, sigma = 0.1, 100.0
    F = ExpIdent()
    G = SinSq()

    def tagger(mid):
        return msh.GAMMA2 if mid[0] <= -1.0 + 1e-12 else msh.GAMMA1

    def domain(n):
        return msh.generate_rect(((-1.0, -1.0), (1.0, 1.0)), n, tagger)

    def p(pts):
        pts = np.atleast_2d(pts)
        return pts[:, 0] ** 4 - pts[:, 1] ** 4

    def grad_p(pts):
        pts = np.atleast_2d(pts)
        return np.column_stack([4 * pts[:, 0] ** 3, -4 * pts[:, 1] ** 3])

    def lap_p(pts):
        pts = np.atleast_2d(pts)
        return 12 * pts[:, 0] ** 2 - 12 * pts[:, 1] ** 2

    def beta(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([F(x) * G(y, 1) / 6.0, -F(x, 1) * G(y)])

    def rot_beta(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return -F(x, 2) * G(y) - F(x) * G(y, 2) / 6.0

    def div_beta(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return F(x, 1) * G(y, 1) / 6.0 - F(x, 1) * G(y, 1)

    return _separable_case(
        "ex1", F, G, nu, sigma, delta=1.0,
        domain=domain, initial_n=4,
        p_parts=(p, grad_p, lap_p),
        beta_parts=(beta, rot_beta, div_beta),
        multiplier=False, gamma2=True,
    )


def _square_p_quartic():
    def p(pts):
        pts = np.atleast_2d(pts)
        return pts[:, 0] ** 4 - pts[:, 1] ** 4

    def grad_p(pts):
        pts = np.atleast_2d(pts)
        return np.column_stack([4 * pts[:, 0] ** 3, -4 * pts[:, 1] ** 3])

    def lap_p(pts):
        pts = np.atleast_2d(pts)
        return 12 * pts[:, 0] ** 2 - 12 * pts[:, 1] ** 2

    return p, grad_p, lap_p


def _case_ex2a():
    F = _quartic_bump()
    G = _quartic_bump()

    def domain(n):
        return msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), n)

    return _separable_case(
        "ex2a", F, G, nu=1e-3, sigma=10.0, delta=1.0,
        domain=domain, initial_n=2,
        p_parts=_square_p_quartic(),
    )


def _case_ex2b():
    c = 0.01
    F = Product(_quartic_bump(), ExpWell(50.0, c))
    G = Product(_quartic_bump(), ExpWell(50.0, c))
    R = Product(Poly([0, 0, 0, 0, 0, 1.0]), ExpWell(25.0, c))   # x^5 e(-25(x-c)^2)
    E25 = ExpWell(25.0, c)

    def domain(n):
        return msh.generate_lshape(n)

    def p(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return R(x) * E25(y) - E25(x) * R(y)

    def grad_p(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        px = R(x, 1) * E25(y) - E25(x, 1) * R(y)
        py = R(x) * E25(y, 1) - E25(x) * R(y, 1)
        return np.column_stack([px, py])

    def lap_p(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return (R(x, 2) * E25(y) - E25(x, 2) * R(y)
                + R(x) * E25(y, 2) - E25(x) * R(y, 2))

    return _separable_case(
        "ex2b", F, G, nu=0.1, sigma=100.0, delta=2.0 / 3.0,
        domain=domain, initial_n=2,
        p_parts=(p, grad_p, lap_p),
    )


# mean of exp(-(x-1/2)^2) over (0,1): sqrt(pi) * erf(1/2)
P0_EX2C = math.sqrt(math.pi) * math.erf(0.5)


def _case_ex2c():
    F = Product(_quartic_bump(), TanhStep(150.0, 0.5))
    G = _quartic_bump()
    E1 = ExpWell(1.0, 0.5)

    def domain(n):
        return msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), n)

    def p(pts):
        pts = np.atleast_2d(pts)
        return E1(pts[:, 0]) - P0_EX2C

    def grad_p(pts):
        pts = np.atleast_2d(pts)
        x = pts[:, 0]
        return np.column_stack([E1(x, 1), np.zeros_like(x)])

    def lap_p(pts):
        pts = np.atleast_2d(pts)
        return E1(pts[:, 0], 2)

    return _separable_case(
        "ex2c", F, G, nu=1e-4, sigma=10.0, delta=1.0,
        domain=domain, initial_n=2,
        p_parts=(p, grad_p, lap_p),
    )


_CASES = {
    "ex1": _case_ex1,
    "ex2a": _case_ex2a,
    "ex2b": _case_ex2b,
    "ex2c": _case_ex2c,
}


def case(name):
    """Manufactured case registry: ex1 | ex2a | ex2b | ex2c."""
    try:
        builder = _CASES[name]
    except KeyError:
        raise KeyError(
            f"unknown case {name!r}; valid cases: {', '.join(sorted(_CASES))}"
        ) from None
    return builder()


# -- error norms ----------------------------------------------------------------


@dataclass
class ErrorRecord:
    err_omega: float
    err_p: float
    err_u_direct: float
    err_u_elliptic: float
    err_V: float
    err_Vw: float
    err0w: float        # |(sigma^1/2 e_w, e_p)|_0


def error_norms(case, sol, u_direct=None, u_elliptic=None, delta=None):
    """Quadrature (exactness 8) L2/V-norm errors against the exact fields."""
    mesh = sol.omega_h.space.mesh
    if delta is None:
        delta = case.delta
    rule = quadrature_rule(8)
    cells = np.arange(mesh.num_triangles)
    phys = mesh.map_points(cells, rule.bary)
    flat = phys.reshape(-1, 2)
    shp = phys.shape[:2]
    _, det, _ = mesh.jacobians()
    wdet = rule.weights[None, :] * det[:, None]

    sq = math.sqrt(case.nu)
    w_ex = np.asarray(case.omega(flat)).reshape(shp)
    gw_ex = np.asarray(case.grad_omega(flat)).reshape(shp + (2,))
    p_ex = np.asarray(case.p(flat)).reshape(shp)
    gp_ex = np.asarray(case.grad_p(flat)).reshape(shp + (2,))

    e_w = w_ex - sol.omega_h.eval_cells(cells, rule.bary)
    e_gw = gw_ex - sol.omega_h.grad_cells(cells, rule.bary)
    e_p = p_ex - sol.p_h.eval_cells(cells, rule.bary)
    e_gp = gp_ex - sol.p_h.grad_cells(cells, rule.bary)

    err_w2 = float(np.einsum("tq,tq->", wdet, e_w ** 2))
    err_p2 = float(np.einsum("tq,tq->", wdet, e_p ** 2))
    # sqrt(nu) curl e_w + grad e_p with curl s = (s_y, -s_x)
    fx = sq * e_gw[..., 1] + e_gp[..., 0]
    fy = -sq * e_gw[..., 0] + e_gp[..., 1]
    per_tri_v = np.einsum(
        "tq,tq->t", wdet, case.sigma * e_w ** 2 + fx ** 2 + fy ** 2 + e_p ** 2
    )
    err_v = float(np.sqrt(per_tri_v.sum()))
    err_vw = float(np.sqrt((mesh.h_T ** (2 * delta) * per_tri_v).sum()))
    err0w = math.sqrt(case.sigma * err_w2 + err_p2)

    u_ex = np.asarray(case.u(flat)).reshape(shp + (2,))
    err_ud = float("nan")
    if u_direct is not None:
        d = u_ex - u_direct.eval_cells(cells, rule.bary)
        err_ud = float(np.sqrt(np.einsum("tq,tqd->", wdet, d ** 2)))
    err_ue = float("nan")
    if u_elliptic is not None:
        d = u_ex - u_elliptic.eval_cells(cells, rule.bary)
        err_ue = float(np.sqrt(np.einsum("tq,tqd->", wdet, d ** 2)))

    return ErrorRecord(
        err_omega=math.sqrt(err_w2),
        err_p=math.sqrt(err_p2),
        err_u_direct=err_ud,
        err_u_elliptic=err_ue,
        err_V=err_v,
        err_Vw=err_vw,
        err0w=err0w,
    )


def convergence_rate(e1, e2, h1, h2):
    """log(e1/e2) / |log(h1/h2)|; adaptive callers pass h = dofs^(-1/2).

    The magnitude of the h-ratio is used so that swapping both pairs
    negates the rate; equal mesh sizes or non-positive inputs raise.
    """
    if min(e1, e2, h1, h2) <= 0:
        raise ValueError("rates need positive errors and mesh sizes")
    if h2 == h1:
        raise ValueError("mesh sizes must differ")
    return math.log(e1 / e2) / abs(math.log(h1 / h2))


# -- study report -----------------------------------------------------------------


_RATED = ["err_omega", "err_p", "err_u_direct", "err_u_elliptic", "err_V",
          "err_Vw", "err0w"]


@dataclass
class StudyRow:
    level: int
    h: float
    dofs: int
    err_omega: float
    err_p: float
    err_u_direct: float
    err_u_elliptic: float
    err_V: float
    err_Vw: float
    err0w: float
    eta: float
    eff1: float
    eff2: float
    rates: dict = field(default_factory=dict)


@dataclass
class StudyReport:
    case_name: str
    k: int
    delta: float
    mode: str                  # "uniform" | "adaptive"
    rows: List[StudyRow] = field(default_factory=list)

    def add_row(self, row):
        if self.rows:
            prev = self.rows[-1]
            for key in _RATED:
                e1, e2 = getattr(prev, key), getattr(row, key)
                if (np.isfinite(e1) and np.isfinite(e2) and min(e1, e2) > 0
                        and row.h < prev.h):
                    row.rates[key] = convergence_rate(e1, e2, prev.h, row.h)
        self.rows.append(row)

    def tail_rate(self, key, n=3):
        vals = [r.rates[key] for r in self.rows if key in r.rates]
        if not vals:
            return float("nan")
        return float(np.mean(vals[-n:]))

    def last_rate(self, key):
        vals = [r.rates[key] for r in self.rows if key in r.rates]
        return vals[-1] if vals else float("nan")

    def column(self, key):
        return np.array([getattr(r, key) for r in self.rows])


# -- independent dense-assembly oracle ---------------------------------------------
#
# Structurally independent of oseen.assemble: global basis functions are
# evaluated by locating quadrature points in cells by brute force, the
# integrals use a locally-built collapsed Gauss rule of exactness 10, and
# the boundary terms use locally-computed outward normals.  Only the
# reference basis tables (eval_basis) are shared.


def _oracle_quadrature(degree=10):
    from numpy.polynomial.legendre import leggauss

    nu_ = (degree + 3) // 2
    nv_ = (degree + 2) // 2
    xu, wu = leggauss(nu_)
    xv, wv = leggauss(nv_)
    xu = 0.5 * (xu + 1.0)
    wu = 0.5 * wu
    xv = 0.5 * (xv + 1.0)
    wv = 0.5 * wv
    pts, wts = [], []
    for u, cu in zip(xu, wu):
        for v, cv in zip(xv, wv):
            pts.append((u, v * (1.0 - u)))
            wts.append(cu * cv * (1.0 - u))
    return np.array(pts), np.array(wts)


class _GlobalBasis:
    """Point-located evaluation of the global scalar P_k basis."""

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = k
        self.nloc = 3 * k
        nv = mesh.num_vertices
        if k == 1:
            self.cell_dofs = mesh.triangles
            self.n = nv
        else:
            self.cell_dofs = np.concatenate(
                [mesh.triangles, nv + mesh.tri_to_edges], axis=1
            )
            self.n = nv + mesh.num_edges

    def locate(self, x):
        mesh = self.mesh
        for t in range(mesh.num_triangles):
            v = mesh.vertices[mesh.triangles[t]]
            J = np.column_stack([v[1] - v[0], v[2] - v[0]])
            xi = np.linalg.solve(J, np.asarray(x) - v[0])
            bary = np.array([1 - xi[0] - xi[1], xi[0], xi[1]])
            if (bary >= -1e-12).all():
                return t, bary
        raise ValueError(f"point {x} not found in mesh")

    def eval_all(self, x):
        """Values and physical gradients of every global basis function at x."""
        t, bary = self.locate(x)
        vals, gref = eval_basis(self.k, bary[None, :])
        v = self.mesh.vertices[self.mesh.triangles[t]]
        J = np.column_stack([v[1] - v[0], v[2] - v[0]])
        invJ = np.linalg.inv(J)
        out_v = np.zeros(self.n)
        out_g = np.zeros((self.n, 2))
        dofs = self.cell_dofs[t]
        out_v[dofs] = vals[0]
        out_g[dofs] = gref[0] @ invJ
        return out_v, out_g


def oracle_assemble(problem, mesh, k):
    """Dense assembly of the unconstrained system by an independent path."""
    if mesh.num_triangles > 50:
        raise ValueError("oracle_assemble is limited to meshes with <= 50 triangles")
    basis = _GlobalBasis(mesh, k)
    nZ = basis.n
    n = 2 * nZ
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    qpts, qwts = _oracle_quadrature(10)
    sigma, nu = problem.sigma, problem.nu
    sqnu = math.sqrt(nu)

    for t in range(mesh.num_triangles):
        v = mesh.vertices[mesh.triangles[t]]
        J = np.column_stack([v[1] - v[0], v[2] - v[0]])
        detJ = abs(np.linalg.det(J))
        for (xi, eta), wq in zip(qpts, qwts):
            x = v[0] + J @ np.array([xi, eta])
            w = wq * detJ
            phi, grad = basis.eval_all(x)
            curl = np.column_stack([grad[:, 1], -grad[:, 0]])
            b = np.asarray(problem.beta(x[None, :]), dtype=float)[0]
            fx = np.asarray(problem.f(x[None, :]), dtype=float)[0]
            # test (zeta_i, 0): sigma (w, zeta) + (sqrt(nu) curl w + grad p
            #   + nu^-1/2 w x beta, sqrt(nu) curl zeta)
            TZ = sqnu * curl                       # per test i
            TQ = grad                              # pressure-test gradients
            trial_w = sqnu * curl                  # sqrt(nu) curl of trial zeta_j
            wxb = np.column_stack([-b[1] * phi, b[0] * phi])  # (w_j x beta)
            # omega-omega block
            A[:nZ, :nZ] += w * (
                sigma * np.outer(phi, phi)
                + TZ @ trial_w.T
                + TZ @ (wxb / sqnu).T
            )
            # omega test, p trial
            A[:nZ, nZ:] += w * (TZ @ TQ.T)
            # p test, omega trial
            A[nZ:, :nZ] += w * (TQ @ (trial_w + wxb / sqnu).T)
            # p test, p trial
            A[nZ:, nZ:] += w * (TQ @ TQ.T)
            rhs[:nZ] += w * (TZ @ fx)
            rhs[nZ:] += w * (TQ @ fx)

    _oracle_boundary(problem, mesh, basis, rhs)
    return A, rhs


def _oracle_boundary(problem, mesh, basis, rhs):
    from numpy.polynomial.legendre import leggauss

    xg, wg = leggauss(6)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    nZ = basis.n
    sigma, sqnu = problem.sigma, math.sqrt(problem.nu)

    for eid in mesh.boundary_edges():
        tag = int(mesh.boundary_tag[eid])
        gfun = problem.g if tag == msh.GAMMA1 else problem.a
        if gfun is None:
            continue
        a, b = mesh.edges[eid]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        length = float(np.linalg.norm(pb - pa))
        tvec = (pb - pa) / length
        nvec = np.array([tvec[1], -tvec[0]])
        # orient outward: away from the incident triangle's centroid
        tri = int(mesh.edge_to_tris[eid, 0])
        centroid = mesh.vertices[mesh.triangles[tri]].mean(axis=0)
        midpoint = 0.5 * (pa + pb)
        if np.dot(nvec, midpoint - centroid) < 0:
            nvec = -nvec
        for s, wq in zip(xg, wg):
            x = pa + s * (pb - pa)
            gval = np.asarray(gfun(x[None, :]), dtype=float)[0]
            phi, _ = basis.eval_all(x)
            # tangential data g.t_e with t_e = (-n2, n1), i.e. -(g x n)
            tang = -(gval[0] * nvec[1] - gval[1] * nvec[0])
            rhs[:nZ] += wq * length * sigma * sqnu * tang * phi
            if tag == msh.GAMMA1:
                rhs[nZ:] -= wq * length * sigma * np.dot(gval, nvec) * phi
