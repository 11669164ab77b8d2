"""Estimator-driven adaptive refinement loop:
solve -> estimate -> size map -> refine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import estimator as est_mod
from . import oseen
from . import postprocess
from . import verify
from .mesh import refine_by_size_map
from .space import build_space


@dataclass
class AdaptConfig:
    max_steps: int = 8
    theta: float = 1.0          # proportionality constant of the size rule
    size_floor: float = 1e-6
    stop_eta: Optional[float] = None
    freeze_mean: bool = False   # freeze eta-mean at step 0 (literal reading)

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.theta <= 0:
            raise ValueError("theta must be positive")


def size_map(mesh, est, cfg, mean_eta=None):
    """Equidistribution targets: theta * h_T * min(1, mean/eta_T), no coarsening.

    Elements at or below the mean keep their size; zero indicators refine
    nothing (the ratio is capped at 1).
    """
    eta_t = np.sqrt(est.eta_sq)
    mean = float(eta_t.mean()) if mean_eta is None else float(mean_eta)
    ratio = np.ones(mesh.num_triangles)
    pos = eta_t > 0
    if mean > 0:
        ratio[pos] = np.minimum(1.0, mean / eta_t[pos])
    target = cfg.theta * mesh.h_T * ratio
    return np.clip(target, cfg.size_floor, mesh.h_T)


@dataclass
class SolveBundle:
    mesh: object
    sol: oseen.OseenSolution
    u_direct: object
    u_elliptic: object
    est: est_mod.EstimatorField
    errors: Optional[verify.ErrorRecord]
    dofs: int


def solve_case_on_mesh(case, mesh, k, delta=None):
    """One full pipeline pass: assemble, solve, recover, estimate, errors."""
    problem = case.problem(delta)
    zh = build_space(mesh, k)
    qh = build_space(mesh, k)
    system = oseen.assemble(problem, zh, qh, mesh)
    system = oseen.apply_constraints(system, problem, qh, mesh)
    sol = oseen.solve(system)
    u_direct = postprocess.recover_direct(problem, sol)
    uh_space = build_space(mesh, k, 2)
    u_elliptic = postprocess.recover_elliptic(
        problem, sol, uh_space, dirichlet=case.u, tangential=case.a or case.u
    )
    est = est_mod.estimate(problem, sol, delta)
    errors = verify.error_norms(case, sol, u_direct, u_elliptic, delta)
    return SolveBundle(mesh, sol, u_direct, u_elliptic, est, errors,
                       system.matrix.shape[0])


def _report_row(bundle, level, h):
    err = bundle.errors
    eta = bundle.est.eta
    eff1, eff2 = est_mod.effectivity(err.err0w, err.err_Vw, eta) if eta > 0 else (0.0, 0.0)
    return verify.StudyRow(
        level=level,
        h=h,
        dofs=bundle.dofs,
        err_omega=err.err_omega,
        err_p=err.err_p,
        err_u_direct=err.err_u_direct,
        err_u_elliptic=err.err_u_elliptic,
        err_V=err.err_V,
        err_Vw=err.err_Vw,
        err0w=err.err0w,
        eta=eta,
        eff1=eff1,
        eff2=eff2,
    )


def uniform_study(case, k, levels, delta=None, initial_n=None,
                  on_level: Optional[Callable] = None):
    """Uniform-refinement convergence study; h column is max h_T."""
    from .mesh import refine_uniform

    mesh = case.domain(initial_n or case.initial_n)
    report = verify.StudyReport(
        case.name, k, case.delta if delta is None else delta, "uniform"
    )
    for level in range(levels):
        bundle = solve_case_on_mesh(case, mesh, k, delta)
        report.add_row(_report_row(bundle, level, mesh.h_max))
        if on_level is not None:
            on_level(level, bundle, report)
        if level < levels - 1:
            mesh = refine_uniform(mesh)
    return report


def adapt_loop(problem_or_case, mesh, k, cfg, case=None, delta=None,
               on_step: Optional[Callable] = None):
    """Adaptive loop; the h column holds dofs^(-1/2).

    Accepts a ManufacturedCase (errors and effectivities computed) or a bare
    OseenProblem (estimator only).  on_step(step, bundle, report) runs after
    each solve, before refinement.  Aborts on solver failure with the rows
    collected so far attached to the raised error.
    """
    if case is None and isinstance(problem_or_case, verify.ManufacturedCase):
        case = problem_or_case
    if delta is None:
        delta = case.delta if case is not None else problem_or_case.delta
    report = verify.StudyReport(
        case.name if case else "problem", k, delta, "adaptive"
    )
    frozen_mean = None
    for step in range(cfg.max_steps):
        try:
            bundle = solve_case_on_mesh(case, mesh, k, delta)
        except oseen.SolverError as exc:
            exc.partial_report = report
            raise
        heff = 1.0 / math.sqrt(bundle.dofs)
        report.add_row(_report_row(bundle, step, heff))
        if on_step is not None:
            on_step(step, bundle, report)
        if cfg.freeze_mean and frozen_mean is None:
            frozen_mean = float(np.sqrt(bundle.est.eta_sq).mean())
        if cfg.stop_eta is not None and bundle.est.eta <= cfg.stop_eta:
            break
        if step < cfg.max_steps - 1:
            targets = size_map(mesh, bundle.est, cfg, mean_eta=frozen_mean)
            mesh = refine_by_size_map(mesh, targets, size_floor=cfg.size_floor)
    return report
