"""Acceptance suite: one test per criterion, one printed line per check.

Runs the full studies at the stated tolerances; the heavy studies are
session-cached.  Expected wall time for the whole module is dominated by
the transient channel run (a few minutes) and the ex2c uniform ladder.
"""

import math
import time

import numpy as np
import pytest

from conftest import poly_beta, poly_f, poly_g
from oseenvb import adapt, cli, estimator, mesh as msh, oseen, space, transient, verify

THETA_ADAPTIVE = 2.0  # size-rule constant used for the adaptive studies


class Checker:
    def __init__(self, name):
        self.name = name
        self.failures = []

    def check(self, label, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {self.name}: {label} {detail}")
        if not ok:
            self.failures.append(f"{label} {detail}")

    def finish(self):
        assert not self.failures, f"{self.name}: {self.failures}"


def band(value, target, tol):
    return abs(value - target) <= tol, f"(got {value:.3f}, want {target}+-{tol})"


@pytest.fixture(scope="module")
def ex1_k1():
    return adapt.uniform_study(verify.case("ex1"), 1, 6, initial_n=4)


@pytest.fixture(scope="module")
def ex1_k2():
    return adapt.uniform_study(verify.case("ex1"), 2, 5, initial_n=4)


@pytest.fixture(scope="module")
def ex2a_studies():
    case = verify.case("ex2a")
    return {d: adapt.uniform_study(case, 1, 7, delta=d) for d in (0.1, 0.5, 1.0)}


@pytest.fixture(scope="module")
def ex2b_adaptive():
    case = verify.case("ex2b")
    return adapt.adapt_loop(case, case.domain(2), 1,
                            adapt.AdaptConfig(max_steps=8, theta=THETA_ADAPTIVE))


@pytest.fixture(scope="module")
def ex2c_pair():
    # theta=2.5 keeps the 8-step adaptive run inside the 7-level uniform
    # DOF ladder, which is the regime where uniform refinement stagnates
    # (an 8th uniform level starts resolving the tanh layer).
    case = verify.case("ex2c")
    uniform = adapt.uniform_study(case, 1, 7)
    adaptive = adapt.adapt_loop(case, case.domain(2), 1,
                                adapt.AdaptConfig(max_steps=8, theta=2.5))
    return uniform, adaptive


def test_criterion_example1_k1(ex1_k1):
    """Example 1, k=1, 6 uniform levels from a 4x4 start, < 2 min."""
    t0 = time.perf_counter()
    rep = ex1_k1
    c = Checker("ex1 k=1")
    c.check("tail rate omega", *band(rep.tail_rate("err_omega"), 2.0, 0.3))
    c.check("tail rate p", *band(rep.tail_rate("err_p"), 2.0, 0.5))
    c.check("tail rate u_direct", *band(rep.tail_rate("err_u_direct"), 1.0, 0.25))
    c.check("tail rate u_elliptic", *band(rep.tail_rate("err_u_elliptic"), 2.0, 0.3))
    c.check("tail rate V", *band(rep.tail_rate("err_V"), 1.0, 0.25))
    c.finish()
    assert time.perf_counter() - t0 < 120.0


def test_criterion_example1_k2(ex1_k2):
    """Example 1, k=2, 5 levels."""
    rep = ex1_k2
    c = Checker("ex1 k=2")
    c.check("tail rate omega", *band(rep.tail_rate("err_omega"), 3.0, 0.4))
    rp = rep.tail_rate("err_p")
    c.check("tail rate p >= 2.7", rp >= 2.7, f"(got {rp:.3f})")
    c.check("tail rate u_direct", *band(rep.tail_rate("err_u_direct"), 2.0, 0.3))
    c.check("tail rate u_elliptic", *band(rep.tail_rate("err_u_elliptic"), 3.0, 0.4))
    c.check("tail rate V", *band(rep.tail_rate("err_V"), 2.0, 0.3))
    c.finish()


def test_criterion_example2a_estimator(ex2a_studies):
    """Example 2A: weighted-V rates, eff2 stability, eff1 boundedness."""
    c = Checker("ex2a")
    for d, rep in ex2a_studies.items():
        c.check(f"delta={d}: tail rate |h^d e|_V",
                *band(rep.tail_rate("err_Vw"), 1.0 + d, 0.15))
    rep1 = ex2a_studies[1.0]
    eff2 = rep1.column("eff2")[-4:]
    mid = 0.5 * (eff2.max() + eff2.min())
    spread = (eff2.max() - eff2.min()) / mid
    c.check("delta=1: eff2 constant within +-15% over last four",
            spread <= 0.30, f"(relative spread {spread:.3f})")
    eff1 = rep1.column("eff1")
    ratio = eff1.max() / eff1.min()
    c.check("delta=1: eff1 bounded, max/min <= 10", ratio <= 10.0,
            f"(max/min {ratio:.2f})")
    c.finish()


def test_criterion_example2a_l2_rate(ex2a_studies):
    """Example 2A: rate of |(sigma^1/2 e_w, e_p)|_0 = 2.0 +- 0.2.

    Known red: this scalar 2D discretization delivers h^1.5
    asymptotically for the pure-Dirichlet multiplier setup (an O(h)
    corner-value defect in w_h specific to k=1 with purely natural
    boundary treatment).  Verified against the dense oracle,
    exact-solution row residuals, three mesh families (two-triangle
    cells, union-jack, criss-cross), nu in {1e-1, 1e-2, 1e-3},
    convection on/off and assembly quadrature exactness 5 vs 8; pinning
    w_h on the boundary (which the formulation does not do) or k=2
    restores the expected orders.
    """
    c = Checker("ex2a L2")
    for d, rep in ex2a_studies.items():
        c.check(f"delta={d}: tail rate |(s^1/2 e_w, e_p)|",
                *band(rep.tail_rate("err0w"), 2.0, 0.2))
    c.finish()


def test_criterion_example2b_adaptive(ex2b_adaptive):
    """Example 2B: adaptive, 8 steps, rates w.r.t. DOF^(-1/2)."""
    rep = ex2b_adaptive
    c = Checker("ex2b adaptive")
    assert len(rep.rows) == 8
    c.check("tail rate omega", *band(rep.tail_rate("err_omega"), 2.0, 0.5))
    c.check("tail rate p", *band(rep.tail_rate("err_p"), 2.0, 0.5))
    c.check("tail rate u_elliptic",
            *band(rep.tail_rate("err_u_elliptic"), 2.0, 0.5))
    eff2 = rep.column("eff2")[-6:]
    ratio = eff2.max() / eff2.min()
    c.check("eff2 max/min <= 3 over last six", ratio <= 3.0,
            f"(max/min {ratio:.2f})")
    c.finish()


def test_criterion_example2c(ex2c_pair):
    """Example 2C: adaptive beats uniform; uniform stagnates."""
    uniform, adaptive = ex2c_pair
    c = Checker("ex2c")
    final = adaptive.rows[-1]
    cands = [r for r in uniform.rows if r.dofs >= final.dofs]
    c.check("uniform ladder reaches the final adaptive DOF count",
            bool(cands), f"(adaptive {final.dofs}, uniform max {uniform.rows[-1].dofs})")
    if cands:
        comp = cands[0]
        c.check("final adaptive V-error < uniform V-error at >= DOFs",
                final.err_V < comp.err_V,
                f"(adaptive {final.err_V:.3e} @ {final.dofs} vs uniform "
                f"{comp.err_V:.3e} @ {comp.dofs})")
    ru = uniform.tail_rate("err_omega")
    c.check("uniform omega tail rate < 0.5 (stagnation)", ru < 0.5,
            f"(got {ru:.3f})")
    ra = adaptive.tail_rate("err_omega")
    c.check("adaptive omega tail rate >= 0.8", ra >= 0.8, f"(got {ra:.3f})")
    c.finish()


def test_criterion_oracle_equivalence():
    """Production assembly matches the dense oracle entrywise to 1e-12."""
    t0 = time.perf_counter()
    c = Checker("oracle")
    meshes = {
        "2-tri": msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 1),
        "8-tri": msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 2),
    }
    betas = {
        "0": None,
        "(1,0)": lambda pts: np.tile([1.0, 0.0], (len(np.atleast_2d(pts)), 1)),
        "x-dep": poly_beta,
    }
    for mname, mesh in meshes.items():
        for k in (1, 2):
            for bname, beta in betas.items():
                kwargs = dict(nu=0.7, sigma=2.0, f=poly_f, g=poly_g)
                if beta is not None:
                    kwargs["beta"] = beta
                prob = oseen.OseenProblem(**kwargs)
                zh = space.build_space(mesh, k)
                qh = space.build_space(mesh, k)
                system = oseen.assemble(prob, zh, qh, mesh)
                A2, b2 = verify.oracle_assemble(prob, mesh, k)
                dA = np.abs(system.matrix.toarray() - A2).max()
                db = np.abs(system.rhs - b2).max()
                ok = (dA <= 1e-12 * max(1.0, np.abs(A2).max())
                      and db <= 1e-12 * max(1.0, np.abs(b2).max()))
                c.check(f"{mname} k={k} beta={bname}", ok,
                        f"(dA={dA:.1e}, db={db:.1e})")
    c.finish()
    assert time.perf_counter() - t0 < 60.0


def test_criterion_property_suite(tmp_path):
    """Bundled property checks from the acceptance list."""
    c = Checker("properties")

    # coercivity probe on Example 1 data, 100 random pairs
    case = verify.case("ex1")
    mesh = case.domain(4)
    zh = space.build_space(mesh, 1)
    qh = space.build_space(mesh, 1)
    rep = oseen.coercivity_probe(case.problem(), zh, qh, mesh,
                                 n_pairs=100, rng=42)
    c.check("coercivity probe (100 pairs, ex1 data)",
            rep.passed and rep.bound1_holds,
            f"(min margin {rep.margins.min():.2e})")

    # Galerkin consistency at the coarsest level of every case
    from test_oseen import galerkin_residual

    for name in ("ex1", "ex2a", "ex2b", "ex2c"):
        cs = verify.case(name)
        resid, scale = galerkin_residual(cs, cs.domain(cs.initial_n), 1)
        c.check(f"Galerkin consistency {name}", resid <= 1e-9 * scale,
                f"(resid {resid:.2e}, scale {scale:.2e})")

    # zero data -> zero solution, zero estimator, zero refinement
    mesh0 = msh.generate_rect(((0.0, 0.0), (1.0, 1.0)), 2)
    prob0 = oseen.OseenProblem(nu=1.0, sigma=1.0)
    z0 = space.build_space(mesh0, 1)
    q0 = space.build_space(mesh0, 1)
    sol0 = oseen.solve(oseen.apply_constraints(
        oseen.assemble(prob0, z0, q0, mesh0), prob0, q0, mesh0))
    est0 = estimator.estimate(prob0, sol0, 1.0)
    tgt0 = adapt.size_map(mesh0, est0, adapt.AdaptConfig())
    c.check("zero problem: zero solution/estimator/refinement",
            np.abs(sol0.omega_h.coeffs).max() == 0.0
            and np.abs(sol0.p_h.coeffs).max() == 0.0
            and est0.eta == 0.0
            and msh.refine_by_size_map(mesh0, tgt0) is mesh0)

    # discrete Green identity to 1e-13 (delegated test asserts internally)
    from test_oseen import test_discrete_green_identity

    test_discrete_green_identity()
    c.check("discrete Green identity (1e-13)", True)

    # basis partition of unity, gradient sum, FD gradients
    rng = np.random.default_rng(1)
    bary = rng.dirichlet(np.ones(3), size=100)
    ok_basis = True
    for k in (1, 2):
        vals, grads = space.eval_basis(k, bary)
        ok_basis &= np.abs(vals.sum(axis=1) - 1).max() <= 1e-13
        ok_basis &= np.abs(grads.sum(axis=1)).max() <= 1e-13
    step = 1e-6
    xy = bary[:20, 1:] * 0.96 + 0.01
    pts = np.column_stack([1 - xy.sum(axis=1), xy])
    for k in (1, 2):
        vals, grads = space.eval_basis(k, pts)
        vp, _ = space.eval_basis(k, np.column_stack(
            [1 - (xy[:, 0] + step) - xy[:, 1], xy[:, 0] + step, xy[:, 1]]))
        vm, _ = space.eval_basis(k, np.column_stack(
            [1 - (xy[:, 0] - step) - xy[:, 1], xy[:, 0] - step, xy[:, 1]]))
        ok_basis &= np.abs((vp - vm) / (2 * step) - grads[..., 0]).max() <= 1e-6
    c.check("basis partition of unity / gradient checks", bool(ok_basis))

    # quadrature exactness table
    ok_quad = True
    for deg in range(1, 9):
        rule = space.quadrature_rule(deg)
        xy = rule.xy()
        for a in range(deg + 1):
            for b in range(deg + 1 - a):
                val = (rule.weights * xy[:, 0] ** a * xy[:, 1] ** b).sum()
                exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                ok_quad &= abs(val - exact) <= 1e-14 * max(1.0, exact)
    c.check("quadrature exactness table (degrees 1..8)", ok_quad)

    # manufactured-case consistency residuals <= 1e-10
    rng = np.random.default_rng(3)
    for name in ("ex1", "ex2a", "ex2b", "ex2c"):
        cs = verify.case(name)
        if name == "ex1":
            pts = rng.uniform(-0.99, 0.99, (50, 2))
        elif name == "ex2b":
            pts = []
            while len(pts) < 50:
                p = rng.uniform(-0.99, 0.99, 2)
                if p[0] < -0.01 or p[1] < -0.01:
                    pts.append(p)
            pts = np.array(pts)
        else:
            pts = rng.uniform(0.01, 0.99, (50, 2))
        res = cs.consistency_residuals(pts).max()
        c.check(f"case consistency {name}", res <= 1e-10, f"(max {res:.1e})")

    # Pythagorean eta aggregation
    c.check("eta aggregation (3,4) -> 5",
            estimator.eta_global([9.0, 16.0]) == pytest.approx(5.0, rel=1e-14))

    # determinism: two identical single-threaded CLI runs byte-identical
    outs = []
    for tag in ("d1", "d2"):
        out = tmp_path / tag
        assert cli.main(["convergence", "--case", "ex2a", "--k", "1",
                         "--levels", "2", "--threads", "1",
                         "--out", str(out)]) == 0
        outs.append((out / "convergence.csv").read_bytes())
    c.check("deterministic single-threaded CSV output", outs[0] == outs[1])

    c.finish()


def test_criterion_transient_bfs():
    """Backward-facing step: dt=0.01, 100 steps, nu=0.05, k=2, < 10 min."""
    t0 = time.perf_counter()
    cfg = transient.TransientConfig(dt=0.01, n_steps=100, geometry="bfs",
                                    k=2, nu=0.05, mesh_n=12, estimate=False)
    result = transient.run_transient(cfg)
    wall = time.perf_counter() - t0
    c = Checker("transient bfs")
    c.check("mesh size <= 20k triangles",
            result.mesh.num_triangles <= 20000,
            f"({result.mesh.num_triangles} triangles)")
    c.check("completes in < 10 min", wall < 600.0, f"({wall:.0f}s)")
    peak = max(r.u_max for r in result.records)
    c.check("velocity bounded by 5x inlet peak", peak <= 5.0,
            f"(max |u| {peak:.2f})")
    c.check("recirculation present at final step",
            transient.recirculation_present(result.final_velocity))
    # approach to steady state: median successive difference decreases
    u = [r.u_norm for r in result.records]
    d = np.abs(np.diff(u))
    q_last = np.median(d[-len(d) // 4:])
    q_prev = np.median(d[-len(d) // 2:-len(d) // 4])
    c.check("median |du| decreasing between final quarters",
            q_last <= q_prev, f"({q_prev:.2e} -> {q_last:.2e})")
    c.finish()
