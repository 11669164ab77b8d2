"""Command-line entry point.

Subcommands: convergence (uniform-refinement study), adapt (estimator-
driven study), transient (backward-Euler demos).  Every run writes a CSV
per the fixed schemas below plus an atomically-written manifest.json
listing configuration, versions, per-stage wall clock and all outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

CONV_HEADER = ("level,h,dofs,err_omega,rate_omega,err_p,rate_p,err_u_direct,"
               "rate_u_direct,err_u_elliptic,rate_u_elliptic,err_V,rate_V,"
               "err_Vw,rate_Vw,eta,eff1,eff2")
ADAPT_HEADER = CONV_HEADER.replace("level,h,", "step,heff,")
TRANSIENT_HEADER = "step,u_norm,u_max,eta,residual"

_RATE_KEYS = [
    ("err_omega", "rate_omega"),
    ("err_p", "rate_p"),
    ("err_u_direct", "rate_u_direct"),
    ("err_u_elliptic", "rate_u_elliptic"),
    ("err_V", "rate_V"),
    ("err_Vw", "rate_Vw"),
]


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _csv_rows(report):
    rows = [CONV_HEADER if report.mode == "uniform" else ADAPT_HEADER]
    for r in report.rows:
        cells = [str(r.level), _fmt(r.h), str(r.dofs)]
        for err_key, _ in _RATE_KEYS:
            cells.append(_fmt(getattr(r, err_key)))
            rate = r.rates.get(err_key)
            cells.append("" if rate is None else _fmt(rate))
        cells += [_fmt(r.eta), _fmt(r.eff1), _fmt(r.eff2)]
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


class Manifest:
    def __init__(self, command, config):
        config = {k: v for k, v in config.items()
                  if k not in ("func", "command")}
        self.data = {
            "command": command,
            "config": config,
            "versions": _versions(),
            "wall_clock": {},
            "outputs": [],
        }
        self._t0 = time.perf_counter()
        self._stage_t = self._t0

    def stage(self, name):
        now = time.perf_counter()
        self.data["wall_clock"][name] = now - self._stage_t
        self._stage_t = now

    def add_output(self, path):
        self.data["outputs"].append(os.path.abspath(path))

    def write(self, out_dir):
        self.data["wall_clock"]["total"] = time.perf_counter() - self._t0
        path = os.path.join(out_dir, "manifest.json")
        tmp = path + ".tmp"
        missing = [p for p in self.data["outputs"] if not os.path.exists(p)]
        if missing:
            raise RuntimeError(f"manifest lists missing outputs: {missing}")
        with open(tmp, "w", encoding="ascii") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        return path


def _versions():
    import scipy

    from . import __version__

    return {
        "oseenvb": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": sys.version.split()[0],
    }


def _out_dir(args):
    out = args.out or os.environ.get("OSEENVB_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)


def cmd_convergence(args):
    from . import adapt as adapt_mod
    from . import verify, vtkio

    case = verify.case(args.case)
    out = _out_dir(args)
    manifest = Manifest("convergence", vars(args).copy())
    snapshots = []

    def on_level(level, bundle, report):
        if args.vtk:
            path = os.path.join(out, f"level_{level:02d}.vtk")
            vtkio.solution_snapshot(path, bundle.mesh, bundle.sol,
                                    bundle.u_elliptic, bundle.u_direct,
                                    bundle.est.eta_sq)
            snapshots.append(path)

    report = adapt_mod.uniform_study(
        case, args.k, args.levels, delta=args.delta,
        initial_n=args.initial_n, on_level=on_level,
    )
    manifest.stage("study")
    csv_path = os.path.join(out, "convergence.csv")
    _write(csv_path, _csv_rows(report))
    manifest.add_output(csv_path)
    for p in snapshots:
        manifest.add_output(p)
    manifest.stage("outputs")
    manifest.write(out)
    return 0


def cmd_adapt(args):
    from . import adapt as adapt_mod
    from . import mesh as mesh_mod
    from . import verify, vtkio

    case = verify.case(args.case)
    out = _out_dir(args)
    manifest = Manifest("adapt", vars(args).copy())
    cfg = adapt_mod.AdaptConfig(
        max_steps=args.steps,
        theta=args.theta,
        freeze_mean=args.freeze_mean,
    )
    mesh = case.domain(args.initial_n or case.initial_n)
    extra = []

    def on_step(step, bundle, report):
        mpath = os.path.join(out, f"mesh_{step:02d}.msh")
        mesh_mod.save_mesh(bundle.mesh, mpath)
        extra.append(mpath)
        if args.vtk:
            vpath = os.path.join(out, f"step_{step:02d}.vtk")
            vtkio.solution_snapshot(vpath, bundle.mesh, bundle.sol,
                                    bundle.u_elliptic, bundle.u_direct,
                                    bundle.est.eta_sq)
            extra.append(vpath)

    report = adapt_mod.adapt_loop(case, mesh, args.k, cfg, delta=args.delta,
                                  on_step=on_step)
    manifest.stage("study")
    csv_path = os.path.join(out, "adapt.csv")
    _write(csv_path, _csv_rows(report))
    manifest.add_output(csv_path)
    for p in extra:
        manifest.add_output(p)
    manifest.stage("outputs")
    manifest.write(out)
    return 0


def cmd_transient(args):
    from . import transient as tr
    from . import vtkio

    out = _out_dir(args)
    manifest = Manifest("transient", vars(args).copy())
    cfg = tr.TransientConfig(
        dt=args.dt,
        n_steps=args.steps,
        geometry=args.geom,
        k=args.k,
        nu=args.nu,
        mesh_n=args.mesh_n,
        snap_every=args.snap_every,
    )
    result = tr.run_transient(cfg)
    manifest.stage("run")

    rows = [TRANSIENT_HEADER]
    for r in result.records:
        rows.append(",".join(
            [str(r.step), _fmt(r.u_norm), _fmt(r.u_max), _fmt(r.eta),
             _fmt(r.residual)]
        ))
    csv_path = os.path.join(out, "transient.csv")
    _write(csv_path, "\n".join(rows) + "\n")
    manifest.add_output(csv_path)
    for step, sol, u_tilde in result.snapshots:
        path = os.path.join(out, f"snap_{step:04d}.vtk")
        vtkio.solution_snapshot(path, result.mesh, sol, u_tilde)
        manifest.add_output(path)
    manifest.stage("outputs")
    manifest.write(out)
    return 0


def _positive_int(value):
    iv = int(value)
    if iv < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return iv


def _delta_type(value):
    dv = float(value)
    if not 0 < dv <= 1:
        raise argparse.ArgumentTypeError(f"delta must lie in (0, 1], got {value}")
    return dv


def build_parser():
    parser = argparse.ArgumentParser(
        prog="oseenvb",
        description="Adaptive 2D Oseen solver in vorticity/Bernoulli-pressure form",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cases = ["ex1", "ex2a", "ex2b", "ex2c"]

    conv = sub.add_parser("convergence", help="uniform-refinement study")
    conv.add_argument("--case", required=True, choices=cases)
    conv.add_argument("--k", type=int, required=True, choices=(1, 2))
    conv.add_argument("--levels", type=_positive_int, required=True)
    conv.add_argument("--delta", type=_delta_type, default=None)
    conv.add_argument("--out", default=None)
    conv.add_argument("--initial-n", type=_positive_int, default=None)
    conv.add_argument("--threads", type=_positive_int, default=1,
                      help="cap on element-parallel workers (runs are "
                           "deterministic; 1 reproduces byte-identical output)")
    conv.add_argument("--vtk", action="store_true")
    conv.set_defaults(func=cmd_convergence)

    adp = sub.add_parser("adapt", help="estimator-driven adaptive study")
    adp.add_argument("--case", required=True, choices=["ex2b", "ex2c"])
    adp.add_argument("--k", type=int, default=1, choices=(1, 2))
    adp.add_argument("--delta", type=_delta_type, default=None)
    adp.add_argument("--steps", type=_positive_int, required=True)
    adp.add_argument("--out", default=None)
    adp.add_argument("--theta", type=float, default=1.0)
    adp.add_argument("--initial-n", type=_positive_int, default=None)
    adp.add_argument("--freeze-mean", action="store_true")
    adp.add_argument("--threads", type=_positive_int, default=1)
    adp.add_argument("--vtk", action="store_true")
    adp.set_defaults(func=cmd_adapt)

    tr = sub.add_parser("transient", help="backward-Euler / Picard demo")
    tr.add_argument("--geom", required=True, choices=["bfs", "obstacles"])
    tr.add_argument("--dt", type=float, default=0.01)
    tr.add_argument("--steps", type=_positive_int, required=True)
    tr.add_argument("--nu", type=float, default=0.05)
    tr.add_argument("--k", type=int, default=2, choices=(1, 2))
    tr.add_argument("--out", default=None)
    tr.add_argument("--snap-every", type=int, default=0)
    tr.add_argument("--mesh-n", type=_positive_int, default=8)
    tr.add_argument("--threads", type=_positive_int, default=1)
    tr.set_defaults(func=cmd_transient)

    return parser


def main(argv=None):
    from .oseen import ConfigurationError, SolverError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except (SolverError,) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
