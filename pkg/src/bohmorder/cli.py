"""Command-line front end.

Every command reads a model (from ``--model FILE`` and/or ``--kind`` plus
numeric overrides), writes CSV files into ``--out``, and records a
``manifest.json`` listing the resolved inputs.  Exit codes: 0 success,
1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import BohmError, ConfigError
from .models import (KINDS, WavefunctionModel, make_model, model_to_text, nodal_lines,
                     parse_model_text)

log = logging.getLogger("bohmorder")

# which module raises each error, for diagnostics
_ERROR_SOURCE = {
    "NodeSingularity": "models",
    "NodeAtInfinity": "models",
    "StepUnderflow": "trajectory",
    "ZeroDeviation": "trajectory",
    "BudgetExceeded": "trajectory",
    "InvalidTruncation": "hh_spectrum",
    "ConvergenceFailure": "hh_spectrum",
    "FrequencyCollision": "trigpoly",
    "EnvelopeViolation": "relaxation",
    "EmptyRegion": "relaxation",
    "SchemaMismatch": "plotting",
}

_PARAM_KEYS = ("a", "b", "c", "d", "epsilon", "gamma1", "gamma2", "K")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# model resolution ------------------------------------------------------------

def resolve_model(args) -> WavefunctionModel:
    over = {k: getattr(args, k) for k in _PARAM_KEYS if getattr(args, k, None) is not None}
    if args.model:
        text = Path(args.model).read_text()
        base = parse_model_text(text)
        if not over and not args.kind:
            return base
        values = _params_of(base)
        values.update(over)
        return make_model(args.kind or base.kind, **values)
    return make_model(args.kind or "harmonic3", **over)


def _params_of(model: WavefunctionModel) -> dict:
    p = model.params
    out = dict(a=p.a, b=p.b, c=p.c)
    if model.kind in ("harmonic5", "wispuj"):
        out["d"] = p.d
    if model.kind == "wispuj":
        out.update(gamma1=p.gamma1, gamma2=p.gamma2)
    if model.kind == "henonheiles3":
        out["epsilon"] = p.epsilon
    return out


# output helpers -----------------------------------------------------------------

class Outputs:
    def __init__(self, directory: str, args, model: WavefunctionModel | None):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.args = args
        self.model = model

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.dir / name
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        self.files.append(name)
        return path

    def write_text(self, name: str, lines) -> Path:
        path = self.dir / name
        path.write_text("\n".join(lines) + "\n")
        self.files.append(name)
        return path

    def plot(self, csv_path: Path, kind: str):
        if getattr(self.args, "plot", False):
            from .plotting import emit_plot

            self.files.append(emit_plot(csv_path, kind).name)

    def manifest(self, extra: dict | None = None):
        inputs = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        doc = {
            "command": self.args.command,
            "version": __version__,
            "numpy": metadata.version("numpy"),
            "inputs": inputs,
            "model": model_to_text(self.model) if self.model is not None else None,
            "seed": getattr(self.args, "seed", None),
            "outputs": self.files,
        }
        if extra:
            doc.update(extra)
        (self.dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


# commands -------------------------------------------------------------------------

def cmd_trajectory(args, out: Outputs):
    from .trajectory import IntegratorConfig, integrate

    cfg = IntegratorConfig(dt=args.dt, t_end=args.tend, sample_dt=args.sample_dt, method=args.method)
    rec = integrate(out.model, args.x0, args.y0, cfg)
    path = out.write_csv("trajectory.csv", ("t", "x", "y"), rec.samples)
    out.plot(path, "path")
    return {"extrema": rec.extrema}


def cmd_lyapunov(args, out: Outputs):
    from .trajectory import IntegratorConfig, chi_loglog_slope, classify_chi, lyapunov

    cfg = IntegratorConfig(dt=args.dt, t_end=args.tend)
    rec = lyapunov(out.model, args.x0, args.y0, cfg, renorm_every=args.renorm_every)
    t, chi = rec.chi()
    rows = [(ti, xi, yi, ci) for (ti, xi, yi), ci in zip(rec.samples[1:], chi)]
    path = out.write_csv("lyapunov.csv", ("t", "x", "y", "chi"), rows)
    out.plot(path, "loglog-chi")
    slope = chi_loglog_slope(rec, args.tend / 100.0, args.tend)
    verdict = classify_chi(rec)
    print(f"chi({args.tend:g}) = {chi[-1]:.6g}  log-log slope = {slope:.4f}  -> {verdict}")
    return {"slope": slope, "classification": verdict, "chi_end": float(chi[-1])}


def cmd_nodal_lines(args, out: Outputs):
    ts = np.linspace(args.tmin, args.tmax, args.nt)
    pts = nodal_lines(out.model, ts, window=tuple(args.window), resolution=args.resolution)
    path = out.write_csv("nodal_lines.csv", ("t", "x", "y"), pts)
    out.plot(path, "path")


def cmd_node_events(args, out: Outputs):
    from .trajectory import IntegratorConfig, integrate, node_distance_events

    cfg = IntegratorConfig(dt=args.dt, t_end=args.tend, sample_dt=args.sample_dt)
    rec = integrate(out.model, args.x0, args.y0, cfg)
    ev = node_distance_events(out.model, rec)
    out.write_csv("node_events.csv", ("t", "u", "v"), ev)
    d = np.hypot(ev[:, 1], ev[:, 2]) if len(ev) else np.empty(0)
    return {"n_events": int(len(ev)), "min_distance": float(d.min()) if d.size else None}


def cmd_series(args, out: Outputs):
    from .series import first_order_solution, inner_series_b0, outer_series
    from .trajectory import IntegratorConfig, integrate

    p = out.model.params
    if out.model.kind != "harmonic3":
        raise ConfigError("series are available for the harmonic3 model only")
    extra = {}
    if args.expansion == "outer":
        sol = outer_series(p.a, p.b, p.c, args.x0, args.y0, args.order)
    elif args.expansion == "inner":
        if p.b != 0:
            raise ConfigError("the inner series needs b = 0")
        sol, verdict = inner_series_b0(p.a, args.x0, args.order, p.c)
        extra["verdict"] = "convergent" if verdict.convergent else "divergent"
        extra["max_abs_ax"] = verdict.max_abs_ax
        print(f"max |a x(t)| = {verdict.max_abs_ax:.4f} -> {extra['verdict']}")
    else:
        sol = first_order_solution(p.a, p.b, p.c, args.x0, args.y0)
    out.write_text("series_x.txt", sol.dump_lines("x"))
    out.write_text("series_y.txt", sol.dump_lines("y"))
    cfg = IntegratorConfig(dt=args.dt, t_end=args.tend, sample_dt=args.sample_dt)
    rec = integrate(out.model, args.x0, args.y0, cfg)
    xs = sol.x(rec.t)
    # the inner expansion leaves y at its initial value
    ys = np.full_like(rec.t, args.y0) if args.expansion == "inner" else sol.y(rec.t)
    out.write_csv("series_compare.csv", ("t", "x_series", "y_series", "x_numeric", "y_numeric"),
                  np.column_stack([rec.t, xs, ys, rec.x, rec.y]))
    extra["secular_weights"] = sol.secular_weights()
    return extra


def cmd_series_table(args, out: Outputs):
    from .series import numeric_extrema, outer_series, series_extrema

    p = out.model.params
    if out.model.kind != "harmonic3":
        raise ConfigError("series tables are available for the harmonic3 model only")
    if len(args.x0) != len(args.y0):
        raise ConfigError("--x0 and --y0 need the same number of values")
    header = ["x0", "y0"]
    for tag in ("4", "15", "num"):
        header += [f"x_max_{tag}", f"x_min_{tag}", f"y_max_{tag}", f"y_min_{tag}"]
    rows = []
    for x0, y0 in zip(args.x0, args.y0):
        row = [x0, y0]
        for N in (4, 15):
            xmin, xmax, ymin, ymax = series_extrema(outer_series(p.a, p.b, p.c, x0, y0, N),
                                                    args.span, args.scan_step)
            row += [xmax, xmin, ymax, ymin]
        xmin, xmax, ymin, ymax = numeric_extrema(p.a, p.b, p.c, x0, y0, args.span, args.dt)
        row += [xmax, xmin, ymax, ymin]
        rows.append(row)
        print(",".join(f"{v:.3f}" for v in row))
    out.write_csv("series_table.csv", header, rows)


def _ensemble(args, model):
    from .relaxation import grid_box, sample_born

    if args.mode == "born":
        return sample_born(model, 0.0, args.n, args.seed)
    side = int(round(math.sqrt(args.n)))
    if side * side != args.n:
        raise ConfigError("box ensembles need a square particle count")
    return grid_box(tuple(args.center), args.side, side)


def cmd_relax(args, out: Outputs):
    from .relaxation import (ENSEMBLE_CFG, DensityGrid, default_sample_times, fill_grid,
                             relaxation_run)

    model = out.model
    ens = _ensemble(args, model)
    cfg = replace(ENSEMBLE_CFG, t_end=args.tend)
    ts = default_sample_times(args.tend) if args.sample_every is None \
        else np.arange(0.0, args.tend + 1e-9, args.sample_every)
    res = relaxation_run(model, ens, cfg, ts, halfplane=args.halfplane, sigma=args.sigma)
    header = ("t", "D", "H_s", "D_bar") if args.halfplane else ("t", "D", "H_s")
    path = out.write_csv("metrics.csv", header, res.rows())
    out.plot(path, "metrics")
    for ts_req in args.snapshots or []:
        k = int(np.argmin(np.abs(res.t - ts_req)))
        rows = [(res.t[k], i, x, y) for i, (x, y) in enumerate(res.snapshots[k])]
        out.write_csv(f"snapshot_t{res.t[k]:g}.csv", ("t", "particle_id", "x", "y"), rows)
        g = fill_grid(model, res.snapshots[k], float(res.t[k]), DensityGrid(), args.sigma)
        X, Y = np.meshgrid(g.coords, g.coords, indexing="ij")
        gpath = out.write_csv(f"grid_t{res.t[k]:g}.csv", ("x", "y", "P_s", "psi2"),
                              np.column_stack([X.ravel(), Y.ravel(), g.P_s.ravel(), g.psi2.ravel()]))
        out.plot(gpath, "contour")
    return {"n_failed": res.n_failed, "D_mean": float(np.mean(res.D))}


def cmd_section(args, out: Outputs):
    from .relaxation import grid_box
    from .trajectory import stroboscopic_section

    pts = []
    for cx, cy in zip(args.centers[::2], args.centers[1::2]):
        pts.append(grid_box((cx, cy), args.side, args.n_side).particles)
    ics = np.vstack(pts)
    sec = stroboscopic_section(out.model, ics, args.periods)
    rows = ((i, k, sec[i, k, 0], sec[i, k, 1]) for i in range(sec.shape[0]) for k in range(sec.shape[1]))
    path = out.write_csv("section.csv", ("traj_id", "k", "x", "y"), rows)
    out.plot(path, "section")


def cmd_recurrence(args, out: Outputs):
    from .trajectory import recurrence_analysis

    ens = _ensemble(args, out.model)
    ra = recurrence_analysis(out.model, ens.particles, args.max_order, budget=args.budget)
    rows = [(n + 1, q, p, T, d, bnd) for n, ((q, p), T, d, bnd)
            in enumerate(zip(ra.convergents, ra.periods, ra.distances, ra.bound()))]
    out.write_csv("recurrence.csv", ("n", "q", "p", "T", "distance", "bound"), rows)
    return {"gamma": ra.gamma, "bound_constant": ra.bound_constant}


def cmd_hh_spectrum(args, out: Outputs):
    from .hh_spectrum import HH_EPSILON, build_spectrum

    eps = HH_EPSILON if args.epsilon is None else args.epsilon
    omega2 = math.sqrt(2.0) / 2.0 if args.c is None else args.c
    K_size = 200 if args.K is None else int(args.K)
    spec = build_spectrum(1.0, omega2, eps, K_size)
    rows = [(k, lab[0], lab[1], E) for k, (lab, E) in enumerate(zip(spec.labels, spec.eigenvalues))]
    out.write_csv("spectrum.csv", ("index", "n", "m", "E"), rows[: args.states])
    spec.save(out.dir / "spectrum_cache.npz")
    out.files.append("spectrum_cache.npz")


# parser ---------------------------------------------------------------------------------

def _model_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", help="model file of key=value lines")
    g.add_argument("--kind", choices=KINDS)
    for k in ("a", "b", "c", "d", "epsilon", "gamma1", "gamma2"):
        g.add_argument(f"--{k}", type=float)
    g.add_argument("--K", type=int, help="basis size for henonheiles3")


def _common(p):
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", action="store_true", help="also write SVG renderings")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bohmorder", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _model_options(p)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = add("trajectory", cmd_trajectory, "integrate one trajectory")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--tend", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--sample-dt", type=float, default=0.01)
    p.add_argument("--method", choices=("rk4", "rk45"), default="rk4")

    p = add("lyapunov", cmd_lyapunov, "finite-time Lyapunov number chi(t)")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--tend", type=float, default=1e4)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--renorm-every", type=int, default=1000)

    p = add("nodal-lines", cmd_nodal_lines, "nodal points over a time grid")
    p.add_argument("--tmin", type=float, default=0.0)
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--nt", type=int, default=2000)
    p.add_argument("--window", type=float, nargs=4, default=(-6.0, 6.0, -6.0, 6.0),
                   metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--resolution", type=int, default=241)

    p = add("node-events", cmd_node_events, "trajectory-node distance minima")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--tend", type=float, default=1000.0)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--sample-dt", type=float, default=0.01)

    p = add("series", cmd_series, "perturbation series and comparison with integration")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--order", type=int, default=15)
    p.add_argument("--expansion", choices=("outer", "inner", "first"), default="outer")
    p.add_argument("--tend", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--sample-dt", type=float, default=0.01)

    p = add("series-table", cmd_series_table, "extrema of 4th/15th order series and integration")
    p.add_argument("--x0", type=_float_list, default=[3.4, 3.2, 3.0])
    p.add_argument("--y0", type=_float_list, default=[3.4, 3.2, 3.0])
    p.add_argument("--span", type=float, default=1e3)
    p.add_argument("--scan-step", type=float, default=1e-3)
    p.add_argument("--dt", type=float, default=1e-3)

    def ensemble_opts(p):
        p.add_argument("--mode", choices=("born", "box"), default="born")
        p.add_argument("--n", type=int, default=961)
        p.add_argument("--center", type=float, nargs=2, default=(1.0, 1.0))
        p.add_argument("--side", type=float, default=0.2)

    p = add("relax", cmd_relax, "ensemble relaxation metrics D, H_s")
    ensemble_opts(p)
    p.add_argument("--tend", type=float, default=1000.0)
    p.add_argument("--sample-every", type=float)
    p.add_argument("--halfplane", choices=("x>0", "x<0"))
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--snapshots", type=_float_list, help="times at which to dump particles and grids")

    p = add("section", cmd_section, "stroboscopic section at t = 2 pi k")
    p.add_argument("--centers", type=_float_list, default=[-0.6, -0.6, 0.9, 0.9],
                   help="x1,y1,x2,y2,... box centres")
    p.add_argument("--side", type=float, default=0.2)
    p.add_argument("--n-side", type=int, default=31)
    p.add_argument("--periods", type=int, default=1000)
    p.set_defaults(kind="wispuj")

    p = add("recurrence", cmd_recurrence, "distances at continued-fraction periods")
    ensemble_opts(p)
    p.add_argument("--max-order", type=int, default=5)
    p.add_argument("--budget", type=float, default=2e4)

    p = add("hh-spectrum", cmd_hh_spectrum, "Hénon-Heiles eigenvalues")
    p.add_argument("--states", type=int, default=20)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"bohmorder: configuration error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        model = None if args.command == "hh-spectrum" else resolve_model(args)
        out = Outputs(args.out, args, model)
        extra = args.func(args, out)
        out.manifest(extra)
    except ConfigError as exc:
        print(f"bohmorder: configuration error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"bohmorder: configuration error: {exc}", file=sys.stderr)
        return 1
    except BohmError as exc:
        name = type(exc).__name__
        print(f"bohmorder: numerical failure in {_ERROR_SOURCE.get(name, 'bohmorder')}: "
              f"{name}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
