"""Backward-Euler / Picard driver: repeated Oseen solves with the
convecting velocity updated from the recovered velocity of the previous
step (f = sigma * beta, beta <- u_tilde after each step).

Ships two demo geometries: a backward-facing step channel (bfs) and a
right-angle channel with three square obstacles driven purely by a
pressure difference (obstacles).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import estimator as est_mod
from . import oseen
from . import postprocess
from .mesh import GAMMA1, GAMMA2, TriMesh, _grid_mesh
from .space import DiscreteField, ScaledField, build_space


def generate_bfs(n=16):
    """Backward-facing step: (0,6)x(0,2) minus the unit square (0,1)^2.

    n cells per unit length; inlet is the left edge (y in (1,2)), outlet
    (Gamma_2) the right edge, everything else a wall.
    """
    def keep(cx, cy):
        return not (cx < 1.0 and cy < 1.0)

    def tagger(mid):
        return GAMMA2 if mid[0] >= 6.0 - 1e-12 else GAMMA1

    return _grid_mesh(0.0, 0.0, 6.0, 2.0, 6 * n, 2 * n, keep, tagger)


# obstacle boxes for the right-angle channel (vertical leg up, horizontal
# leg out to the left), representative geometry only
_OBSTACLES = (
    ((0.25, 0.625), (-1.5, -1.125)),
    ((0.375, 0.75), (-0.5, -0.125)),
    ((-1.125, -0.75), (0.25, 0.625)),
)


def generate_obstacles(n=8):
    """Channel with three square obstacles, pressure-driven.

    Domain: vertical strip (0,1) x (-2,1) joined to horizontal strip
    (-2,1) x (0,1); inlet (0,1) x {-2} and outlet {-2} x (0,1) are
    Gamma_2, all other boundary (including obstacles) Gamma_1 walls.
    """
    def keep(cx, cy):
        inside = (0 < cx < 1 and -2 < cy < 1) or (-2 < cx < 1 and 0 < cy < 1)
        if not inside:
            return False
        for (x0, x1), (y0, y1) in _OBSTACLES:
            if x0 < cx < x1 and y0 < cy < y1:
                return False
        return True

    def tagger(mid):
        x, y = mid
        if abs(y + 2.0) < 1e-12 or abs(x + 2.0) < 1e-12:
            return GAMMA2
        return GAMMA1

    return _grid_mesh(-2.0, -2.0, 1.0, 1.0, 3 * n, 3 * n, keep, tagger)


def bfs_inlet_profile(pts):
    """Parabolic inlet (4(y-1)(2-y), 0) on x=0, zero on the walls."""
    pts = np.atleast_2d(pts)
    out = np.zeros((len(pts), 2))
    at_inlet = np.abs(pts[:, 0]) < 1e-12
    y = pts[at_inlet, 1]
    out[at_inlet, 0] = 4.0 * (y - 1.0) * (2.0 - y)
    return out


@dataclass
class TransientConfig:
    dt: float = 0.01
    n_steps: int = 100
    geometry: str = "bfs"
    k: int = 2
    nu: float = 0.05
    mesh_n: int = 8
    snap_every: int = 0          # 0 disables VTK snapshots
    out_dir: Optional[str] = None
    ramp_steps: int = 10         # inlet-pressure ramp (obstacles)
    p_in_max: float = 3.0
    estimate: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.geometry not in ("bfs", "obstacles"):
            raise ValueError(f"unknown geometry {self.geometry!r}")

    @property
    def sigma(self):
        return 1.0 / self.dt


@dataclass
class StepRecord:
    step: int
    u_norm: float
    u_max: float
    eta: float
    residual: float
    beta_used: Optional[DiscreteField] = None   # the convecting field object


@dataclass
class TransientResult:
    mesh: TriMesh
    records: List[StepRecord]
    snapshots: List[object] = field(default_factory=list)  # (step, sol, u_tilde)
    final_velocity: Optional[DiscreteField] = None


def _field_l2(field):
    from .oseen import scalar_mass

    sp = field.space
    M = scalar_mass(sp, sp.mesh)
    ns = sp.num_scalar
    ux, uy = field.coeffs[:ns], field.coeffs[ns:]
    return float(np.sqrt(ux @ (M @ ux) + uy @ (M @ uy)))


def run_transient(cfg: TransientConfig, mesh=None,
                  on_step: Optional[Callable] = None):
    """Time loop; beta at step n is bitwise the recovered velocity of n-1."""
    if mesh is None:
        mesh = generate_bfs(cfg.mesh_n) if cfg.geometry == "bfs" \
            else generate_obstacles(cfg.mesh_n)
    zh = build_space(mesh, cfg.k)
    qh = build_space(mesh, cfg.k)
    uh_space = build_space(mesh, cfg.k, 2)
    sigma = cfg.sigma

    beta = DiscreteField.zeros(uh_space)
    if cfg.geometry == "bfs":
        g_fun = bfs_inlet_profile
        a_fun = None
        p0_fun = lambda pts: np.zeros(len(np.atleast_2d(pts)))
    else:
        g_fun = None  # walls: zero velocity (None means zero data in F)

        def a_fun(pts):
            return np.zeros((len(np.atleast_2d(pts)), 2))

        p0_fun = None  # set per step (pressure ramp)

    result = TransientResult(mesh, [])
    for step in range(cfg.n_steps):
        if cfg.geometry == "obstacles":
            p_in = cfg.p_in_max * min((step + 1) / cfg.ramp_steps, 1.0)

            def p0_fun(pts, p_in=p_in):
                pts = np.atleast_2d(pts)
                return np.where(np.abs(pts[:, 1] + 2.0) < 1e-9, p_in, 0.0)

        problem = oseen.OseenProblem(
            nu=cfg.nu, sigma=sigma,
            beta=beta, f=ScaledField(beta, sigma),
            g=g_fun, a=a_fun, p0=p0_fun, delta=1.0,
        )
        try:
            system = oseen.assemble(problem, zh, qh, mesh)
            system = oseen.apply_constraints(system, problem, qh, mesh)
            sol = oseen.solve(system)
            u_tilde = postprocess.recover_elliptic(
                problem, sol, uh_space,
                dirichlet=g_fun or (lambda pts: np.zeros((len(np.atleast_2d(pts)), 2))),
                tangential=a_fun,
            )
        except oseen.SolverError as exc:
            exc.step = step
            exc.partial_result = result
            raise

        eta = float("nan")
        if cfg.estimate:
            eta = est_mod.estimate(problem, sol).eta
        rec = StepRecord(
            step=step,
            u_norm=_field_l2(u_tilde),
            u_max=float(np.abs(u_tilde.coeffs).max()),
            eta=eta,
            residual=sol.residual,
            beta_used=beta,
        )
        result.records.append(rec)
        if cfg.snap_every and (step % cfg.snap_every == 0 or step == cfg.n_steps - 1):
            result.snapshots.append((step, sol, u_tilde))
        if on_step is not None:
            on_step(step, sol, u_tilde, rec)
        beta = u_tilde

    result.final_velocity = beta
    return result


def recirculation_present(u_tilde, box=((1.0, 2.0), (0.0, 0.5))):
    """True if the x-velocity is negative somewhere inside the box."""
    sp = u_tilde.space
    pts = sp.scalar_points
    (x0, x1), (y0, y1) = box
    sel = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    if not sel.any():
        return False
    return bool((u_tilde.coeffs[:sp.num_scalar][sel] < 0).any())
