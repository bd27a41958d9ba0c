"""Command-line front end.

Subcommands: classify, kernel-eval, kernel-verify, evolve, solve, sweep,
mc-validate.  Settings come from an optional JSON/TOML config file with
sections ``model``, ``grid``, ``solver``, ``mc``, ``initial`` and ``sweep``;
command-line flags override config keys.

Exit codes: 0 success, 2 hypotheses violated, 3 numerical failure,
64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import (Field, Grid, GrushinError, HypothesisError, ModelParams, NumericalError, gaussian,
                   lp_norm, plateau, regime_classify)
from .fieldio import fmt, read_field, write_field
from .kernel import (KernelQuadrature, adapted_grid, decay_exponent_fit, kernel_mass, kernel_point,
                     predicted_decay_exponent)
from .mc_oracle import McConfig, density_compare, exact_moments, moments, simulate_paths
from .mild_solver import (TRAJECTORY_COLUMNS, SolverConfig, detect_blowup,
                          picard_solve, step_evolve)
from .semigroup import semigroup, wraparound_mass

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_USAGE = 0, 2, 3, 64

SCHEMA_PATH = Path(__file__).with_name("schema.json")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- config

def load_config(path) -> dict:
    if path is None:
        return {}
    text = Path(path).read_bytes()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text.decode())
    return json.loads(text)


def _merge(section: dict, args, names) -> dict:
    out = dict(section)
    for key, attr in names.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    return out


def resolve(args) -> dict:
    cfg = load_config(args.config)
    model = _merge(cfg.get("model", {}), args,
                   {"N": "N", "k": "k", "rho": "rho", "p": "p", "r": "r", "lam": "lam"})
    params = ModelParams(**model)
    grid_kw = {"N": params.N, "k": params.k}
    grid_kw.update(_merge(cfg.get("grid", {}), args, {"x_extent": "x_extent", "x_points": "x_points",
                                                      "y_extent": "y_extent", "y_points": "y_points"}))
    grid_kw["N"], grid_kw["k"] = params.N, params.k
    grid = Grid(**grid_kw)
    solver = SolverConfig(**_merge(cfg.get("solver", {}), args, {
        "T": "T", "dt": "dt", "picard_tol": "picard_tol", "picard_max_iter": "picard_max_iter",
        "blowup_threshold": "blowup_threshold", "grading": "grading"}))
    mc_kw = _merge(cfg.get("mc", {}), args, {"paths": "paths", "dt": "mc_dt", "seed": "seed", "x0": "x0"})
    mc_kw["x0"] = tuple(_floats(mc_kw.get("x0", [1.0] * params.N)))
    threads = args.threads or (int(os.environ["GRUSHIN_THREADS"]) if os.environ.get("GRUSHIN_THREADS") else None)
    mc = McConfig(threads=threads, **mc_kw)
    initial = _merge(cfg.get("initial", {}), args, {"profile": "profile", "amplitude": "amplitude",
                                                    "x_width": "x_width", "y_width": "y_width"})
    sweep = dict(cfg.get("sweep", {}))
    for key, attr in (("rho", "rho_list"), ("p", "p_list"), ("amplitude", "amplitude_list")):
        if getattr(args, attr, None):
            sweep[key] = _floats(getattr(args, attr))
    h = hashlib.sha256(json.dumps({"model": model, "grid": grid.as_dict(), "solver": solver.as_dict(),
                                   "mc": mc.as_dict(), "initial": initial, "sweep": sweep,
                                   "argv": _arg_snapshot(args)}, sort_keys=True).encode()).hexdigest()
    return {"params": params, "grid": grid, "solver": solver, "mc": mc, "initial": initial,
            "sweep": sweep, "config_hash": h, "threads": threads}


def _arg_snapshot(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "threads")}


def _floats(v):
    if isinstance(v, str):
        return [float(s) for s in v.split(",") if s.strip()]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(s) for s in v]


def initial_field(grid: Grid, initial: dict, input_path=None) -> Field:
    if input_path:
        return read_field(input_path, grid)
    kind = initial.get("profile", "gaussian")
    amp = float(initial.get("amplitude", 1.0))
    if kind == "gaussian":
        return gaussian(grid, amp, float(initial.get("x_width", 1.0)), float(initial.get("y_width", 1.0)))
    if kind == "plateau":
        return plateau(grid, amp, float(initial.get("x_half", 4.0)), float(initial.get("y_half", 6.0)),
                       float(initial.get("edge", 0.25)))
    raise UsageError(f"unknown initial profile {kind!r}")


# ---------------------------------------------------------------- output

def _manifest(args, res, wall):
    return {
        "subcommand": args.command,
        "tool_version": __version__,
        "model": {"N": res["params"].N, "k": res["params"].k, "rho": res["params"].rho,
                  "p": res["params"].p, "r": res["params"].r, "lam": res["params"].lam},
        "grid": res["grid"].as_dict(),
        "solver": res["solver"].as_dict(),
        "mc": res["mc"].as_dict(),
        "input_config_hash": res["config_hash"],
        "wall_clock_seconds": wall,
    }


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


class Output:
    """Writes result files into ``--out`` (or stdout) and a manifest beside them."""

    def __init__(self, args):
        self.dir = Path(args.out) if args.out else None
        if self.dir:
            self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def json(self, name, obj):
        text = _dump_json(obj)
        if self.dir is None:
            sys.stdout.write(text)
        else:
            (self.dir / name).write_text(text)
            self.files.append(name)

    def csv(self, name, header, rows):
        if self.dir is None:
            _write_rows(sys.stdout, header, rows)
            return
        with open(self.dir / name, "w", newline="") as fh:
            _write_rows(fh, header, rows)
        self.files.append(name)

    def field(self, name, f: Field):
        if self.dir is not None:
            write_field(self.dir / name, f)
            self.files.append(name)

    def manifest(self, man):
        if self.dir is not None:
            man = dict(man, files=sorted(self.files))
            (self.dir / "manifest.json").write_text(_dump_json(man))


def _write_rows(fh, header, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


# ---------------------------------------------------------------- commands

def cmd_classify(args, res, out):
    out.json("classify.json", regime_classify(res["params"]).as_dict())


def cmd_kernel_eval(args, res, out):
    params = res["params"]
    quad = _quad(args)
    N, k = params.N, params.k
    xs = _points(args.x, N)
    x0s = _points(args.x0, N)
    ys = _points(args.y, k)
    ts = _floats(args.t)
    header = _names("x", N) + _names("x0", N) + _names("y", k) + ["t", "value"]
    rows = []
    for x, x0, y, t in itertools.product(xs, x0s, ys, ts):
        rows.append([*x, *x0, *y, t, kernel_point(params, quad, x, x0, y, t)])
    out.csv("kernel.csv", header, rows)


def cmd_kernel_verify(args, res, out):
    params = res["params"]
    quad = _quad(args)
    t = float(_floats(args.t)[0])
    x0 = np.asarray(_points(args.x0, params.N)[0])
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    mass = kernel_mass(params, quad, None, x0, t)

    sym = scal = 0.0
    for _ in range(args.probes):
        x = rng.uniform(-1.5, 1.5, params.N)
        xx = rng.uniform(-1.5, 1.5, params.N)
        y = rng.uniform(-1.0, 1.0, params.k)
        tt = float(np.exp(rng.uniform(np.log(0.25), np.log(4.0))))
        ref = kernel_point(params, quad, x, xx, y, tt)
        sym = max(sym, abs(kernel_point(params, quad, xx, x, y, tt) - ref) / ref,
                  abs(kernel_point(params, quad, x, xx, -y, tt) - ref) / ref)
        s = tt ** (-0.5 * params.Q) * kernel_point(params, quad, x / np.sqrt(tt), xx / np.sqrt(tt), y / tt, 1.0)
        scal = max(scal, abs(s - ref) / ref)

    t_list = t * np.geomspace(0.25, 8.0, 6)
    base = adapted_grid(params, 1.0, 0.0, x_points=args.fit_points, y_points=2 * args.fit_points)
    slopes, pred = {}, {}
    for q in (1.0, 2.0, math.inf):
        name = "inf" if math.isinf(q) else f"{q:g}"
        slopes[name] = decay_exponent_fit(params, quad, base, np.zeros(params.N), q, t_list)
        pred[name] = predicted_decay_exponent(params, q)
    out.json("kernel_verify.json", {"t": t, "x0": x0.tolist(), "mass": mass, "mass_error": mass - 1.0,
                                    "symmetry_residual": sym, "scaling_residual": scal,
                                    "slopes": slopes, "predicted_slopes": pred})


def cmd_evolve(args, res, out):
    params, grid = res["params"], res["grid"]
    phi = initial_field(grid, res["initial"], args.input)
    t = float(args.t)
    u = semigroup(params, grid, t, phi)
    out.json("evolve.json", {"t": t, "mass_in": phi.integral(), "mass_out": u.integral(),
                             "lp_in": lp_norm(phi, params.p), "lp_out": lp_norm(u, params.p),
                             "linf_out": lp_norm(u, math.inf),
                             "wraparound_mass": wraparound_mass(params, grid, phi, t)})
    out.field(args.field_name, u)


def cmd_solve(args, res, out):
    params, grid, cfg = res["params"], res["grid"], res["solver"]
    u0 = initial_field(grid, res["initial"], args.input)
    if args.method == "picard":
        report, states = picard_solve(params, grid, cfg, u0)
        final = states[-1]
    else:
        report, final = step_evolve(params, grid, cfg, u0)
    verdict = detect_blowup(report, params.rho, cfg.blowup_threshold) if report.times.size >= 3 else None
    body = report.as_dict()
    body["regime"] = regime_classify(params).as_dict()
    body["t_max"] = verdict.t_max if verdict else None
    out.json("report.json", body)
    if out.dir is not None:
        out.csv("trajectory.csv", TRAJECTORY_COLUMNS, report.rows())
        out.field(args.field_name, final)
    return EXIT_NUMERICAL if report.status == "no-convergence" else EXIT_OK


def cmd_sweep(args, res, out):
    params, grid, cfg = res["params"], res["grid"], res["solver"]
    sw = res["sweep"]
    rhos = _floats(sw.get("rho", [params.rho]))
    ps = _floats(sw.get("p", [params.p]))
    amps = _floats(sw.get("amplitude", [res["initial"].get("amplitude", 1.0)]))
    rows = []
    for rho, p, amp in itertools.product(rhos, ps, amps):
        cell = replace(params, rho=rho, p=p)
        reg = regime_classify(cell)
        if reg.regime.value == "hypotheses-violated":
            rows.append([rho, p, amp, reg.regime.value, "skipped", 0, math.nan, math.nan, math.nan])
            continue
        u0 = initial_field(grid, dict(res["initial"], amplitude=amp))
        report, _ = step_evolve(cell, grid, cfg, u0)
        v = detect_blowup(report, rho, cfg.blowup_threshold) if report.times.size >= 3 else None
        blow = bool(v and v.blowup)
        rows.append([rho, p, amp, reg.regime.value, report.status, int(blow),
                     v.t_max if blow else math.nan,
                     v.crossing_time if (v and v.crossing_time is not None) else math.nan,
                     float(np.max(report.lrhop_norm_traj))])
    out.csv("sweep.csv", ["rho", "p", "amplitude", "regime", "status", "blowup", "t_max",
                          "crossing_time", "max_lrhop_norm"], rows)


def cmd_mc_validate(args, res, out):
    params, mc = res["params"], res["mc"]
    t = float(args.t)
    sample = simulate_paths(params, mc, t)
    body = {"t": t, "exact": exact_moments(params, mc.x0, t)}
    body.update(moments(sample))
    if params.N == 1 and params.k == 1:
        d = density_compare(params, mc, _quad(args), t, bins=args.bins, sample=sample, return_bins=True)
        if args.histogram:
            xe, ye = d["x_edges"], d["y_edges"]
            rows = [[xe[i], xe[i + 1], ye[j], ye[j + 1], d["empirical"][i, j], d["kernel"][i, j]]
                    for i in range(len(xe) - 1) for j in range(len(ye) - 1)]
            out.csv("histogram.csv", ["x_lo", "x_hi", "y_lo", "y_hi", "empirical", "kernel"], rows)
        body.update({k: v for k, v in d.items() if not isinstance(v, np.ndarray)})
    out.json("mc_validate.json", body)


def _names(stem, dim):
    return [stem] if dim == 1 else [f"{stem}_{i + 1}" for i in range(dim)]


def _quad(args):
    return KernelQuadrature(xi_points=getattr(args, "xi_points", None) or 64)


def _points(text, dim):
    """'a,b;c,d' -> [(a,b),(c,d)]; in one dimension '0.5,1' means two points."""
    if dim == 1 and ";" not in text:
        return [(v,) for v in _floats(text)]
    pts = [tuple(_floats(s)) for s in text.split(";") if s.strip()]
    for pt in pts:
        if len(pt) != dim:
            raise UsageError(f"point {pt} should have {dim} coordinates")
    return pts


# ---------------------------------------------------------------- parser

def _schema_epilog(keys) -> str:
    try:
        schema = json.loads(SCHEMA_PATH.read_text())
    except OSError:
        return ""
    lines = ["output columns:"]
    for key in keys:
        for col, desc in schema.get(key, {}).items():
            lines.append(f"  {key}: {col} = {desc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and grid (override config keys)")
    g.add_argument("--config", help="JSON or TOML config file")
    g.add_argument("--N", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--rho", type=float)
    g.add_argument("--p", type=float)
    g.add_argument("--r", type=float)
    g.add_argument("--lam", type=float, help="nonlinearity multiplier (0 disables the source)")
    g.add_argument("--x-extent", dest="x_extent", type=float)
    g.add_argument("--x-points", dest="x_points", type=int)
    g.add_argument("--y-extent", dest="y_extent", type=float)
    g.add_argument("--y-points", dest="y_points", type=int)
    common.add_argument("--out", help="output directory (default: print to stdout)")
    common.add_argument("--threads", type=int, help="worker threads (fallback: GRUSHIN_THREADS)")

    init = argparse.ArgumentParser(add_help=False)
    init.add_argument("--input", help="initial field file (GRSH1 binary or CSV)")
    init.add_argument("--profile", choices=["gaussian", "plateau"])
    init.add_argument("--amplitude", type=float)
    init.add_argument("--x-width", dest="x_width", type=float)
    init.add_argument("--y-width", dest="y_width", type=float)
    init.add_argument("--field-name", dest="field_name", default="field.grsh",
                      help="file name of the written field (.csv for CSV)")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--T", type=float)
    solver.add_argument("--dt", type=float)
    solver.add_argument("--picard-tol", dest="picard_tol", type=float)
    solver.add_argument("--picard-max-iter", dest="picard_max_iter", type=int)
    solver.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    solver.add_argument("--grading", type=float)

    fmt_cls = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="grushin", description=__doc__, formatter_class=fmt_cls)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("classify", parents=[common], help="regime classification",
                       epilog=_schema_epilog([]), formatter_class=fmt_cls)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("kernel-eval", parents=[common], help="evaluate K at points",
                       epilog=_schema_epilog(["kernel-eval.csv"]), formatter_class=fmt_cls)
    p.add_argument("--x", required=True, help="points, ';'-separated, coordinates ','-separated")
    p.add_argument("--x0", default="0")
    p.add_argument("--y", default="0")
    p.add_argument("--t", default="1")
    p.add_argument("--xi-points", dest="xi_points", type=int)
    p.set_defaults(func=cmd_kernel_eval)

    p = sub.add_parser("kernel-verify", parents=[common], help="mass, symmetry, scaling and decay checks",
                       epilog=_schema_epilog(["kernel-verify.json"]), formatter_class=fmt_cls)
    p.add_argument("--t", default="1")
    p.add_argument("--x0", default="0")
    p.add_argument("--probes", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--fit-points", dest="fit_points", type=int, default=64)
    p.add_argument("--xi-points", dest="xi_points", type=int)
    p.set_defaults(func=cmd_kernel_verify)

    p = sub.add_parser("evolve", parents=[common, init], help="apply S(t) to a field",
                       epilog=_schema_epilog(["evolve.json"]), formatter_class=fmt_cls)
    p.add_argument("--t", required=True, type=float)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("solve", parents=[common, init, solver], help="semilinear mild solution",
                       epilog=_schema_epilog(["solve.trajectory.csv", "solve.report.json"]),
                       formatter_class=fmt_cls)
    p.add_argument("--method", choices=["picard", "step"], default="picard")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common, init, solver], help="blow-up verdicts over (rho, p, amplitude)",
                       epilog=_schema_epilog(["sweep.csv"]), formatter_class=fmt_cls)
    p.add_argument("--rho-list", dest="rho_list")
    p.add_argument("--p-list", dest="p_list")
    p.add_argument("--amplitude-list", dest="amplitude_list")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("mc-validate", parents=[common], help="Monte Carlo check of the kernel",
                       epilog=_schema_epilog(["mc-validate.json", "mc-validate.histogram.csv"]),
                       formatter_class=fmt_cls)
    p.add_argument("--t", default="1")
    p.add_argument("--paths", type=int)
    p.add_argument("--mc-dt", dest="mc_dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--x0")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--histogram", action="store_true", help="also write histogram.csv")
    p.add_argument("--xi-points", dest="xi_points", type=int)
    p.set_defaults(func=cmd_mc_validate)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    start = time.perf_counter()
    try:
        res = resolve(args)
        out = Output(args)
        code = args.func(args, res, out) or EXIT_OK
        out.manifest(_manifest(args, res, time.perf_counter() - start))
        return code
    except HypothesisError as exc:
        print(f"grushin: hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NumericalError as exc:
        print(f"grushin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, TypeError, OSError) as exc:
        print(f"grushin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrushinError as exc:
        print(f"grushin: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
