"""Command-line harness.

Subcommands::

    pathspace run <config.json>
    pathspace sweep <config.json> --axis {dt,n_paths,t} --values v1 v2 ...
    pathspace j1 <pathA.json> <pathB.json> [--window a b] [--s-max S] [--quad-step h]
    pathspace solve-dde <config.json>
    pathspace simulate <config.json>

Exit codes: 0 all checks pass, 1 any check failed, 2 configuration error.
The report path writes the delimited rows first, then renders matplotlib
figures next to them (disable with --no-figures).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import Experiment, load_experiment, load_experiment_file
from .errors import ConfigError, PathspaceError
from .metrics import SearchBudget, d_ab_j1, d_j1
from .paths import PastSegment, SampledPath
from .reporting import (RUN_COLUMNS, render_path_figure, render_run_figure,
                        render_sweep_figure, write_csv, write_json_report)
from .runner import run_checks

SWEEP_COLUMNS = ["axis", "axis_value"] + RUN_COLUMNS


def _threads_env():
    n = os.environ.get("PATHSPACE_THREADS")
    if n:
        try:
            import numba
            numba.set_num_threads(max(1, int(n)))
        except (ImportError, ValueError):
            pass


def _out_paths(exp: Experiment, config_path: str, kind: str):
    out = exp.output or {}
    stem = Path(config_path).stem
    csv = out.get("csv", f"{stem}_{kind}.csv")
    js = out.get("json", f"{stem}_{kind}.json")
    figdir = out.get("figures_dir", str(Path(csv).parent / "figures"))
    return csv, js, figdir


def cmd_run(args) -> int:
    exp = load_experiment_file(args.config)
    t0 = time.perf_counter()
    rows = run_checks(exp)
    wall = time.perf_counter() - t0
    csv, js, figdir = _out_paths(exp, args.config, "report")
    write_csv(rows, RUN_COLUMNS + ["digest"], csv)
    write_json_report(exp.name, exp.seed, rows, wall, js)
    if not args.no_figures:
        render_run_figure(rows, str(Path(figdir) / f"{exp.name}_checks.png"),
                          title=exp.name)
    n_fail = sum(1 for r in rows if not r["passed"])
    for r in rows:
        mark = "PASS" if r["passed"] else "FAIL"
        print(f"[{mark}] {r['check']}[{r['index']}] {r['item']}: "
              f"{r['statistic']:.6g} ({r['stat_kind']}, tol {r['tolerance']:.6g})")
    print(f"{len(rows) - n_fail}/{len(rows)} checks passed in {wall:.2f}s -> {csv}")
    return 0 if n_fail == 0 else 1


def _apply_axis(doc: dict, axis: str, value: float) -> dict:
    doc = copy.deepcopy(doc)
    if axis == "dt":
        if "expectation" in doc:
            doc["expectation"]["mc"]["dt"] = value
        for p in doc.get("paths", {}).values():
            p["dt"] = value
        for c in doc.get("checks", []):
            if "dt" in c:
                c["dt"] = value
    elif axis == "n_paths":
        if "expectation" in doc:
            doc["expectation"]["mc"]["n_paths"] = int(value)
        for c in doc.get("checks", []):
            if "n_paths" in c:
                c["n_paths"] = int(value)
    elif axis == "t":
        for c in doc.get("checks", []):
            if "t" in c:
                c["t"] = value
    else:
        raise ConfigError("/sweep/axis", f"unknown axis {axis!r}")
    return doc


def cmd_sweep(args) -> int:
    with open(args.config) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError("/", f"invalid JSON: {e}")
    rows = []
    for v in args.values:
        exp = load_experiment(_apply_axis(doc, args.axis, v))
        for r in run_checks(exp):
            r2 = {"axis": args.axis, "axis_value": v}
            r2.update(r)
            rows.append(r2)
    exp0 = load_experiment(doc)
    csv, js, figdir = _out_paths(exp0, args.config, f"sweep_{args.axis}")
    write_csv(rows, SWEEP_COLUMNS + ["digest"], csv)
    write_json_report(exp0.name, exp0.seed, rows, 0.0, js)
    if not args.no_figures and rows:
        render_sweep_figure(rows, args.axis,
                            str(Path(figdir) / f"{exp0.name}_sweep_{args.axis}.png"),
                            title=f"{exp0.name}: sweep over {args.axis}")
    n_fail = sum(1 for r in rows if not r["passed"])
    print(f"{len(rows) - n_fail}/{len(rows)} sweep rows passed -> {csv}")
    return 0 if n_fail == 0 else 1


def cmd_j1(args) -> int:
    with open(args.path_a) as f:
        xa = SampledPath.from_json(f.read())
    with open(args.path_b) as f:
        xb = SampledPath.from_json(f.read())
    budget = SearchBudget(max_matchings=args.max_matchings,
                          slope_levels=args.slope_levels,
                          quad_step=args.quad_step, s_max=args.s_max)
    if args.window:
        a, b = args.window
        mv = d_ab_j1(xa, xb, a, b, budget)
    else:
        mv = d_j1(xa, xb, args.s_max, args.quad_step, budget)
    print(json.dumps(mv.to_json_dict(), indent=2))
    return 0


def cmd_solve_dde(args) -> int:
    from .config import build_dynamics
    with open(args.config) as f:
        doc = json.load(f)
    dyn = build_dynamics(doc["dynamics"] if "dynamics" in doc else doc,
                         "/dynamics")
    if dyn.type != "dde":
        raise ConfigError("/dynamics/type", "solve-dde needs dde dynamics")
    dt = float(doc["dt"])
    T = float(doc["T"])
    h = dyn.drift.delay if hasattr(dyn.drift, "delay") else dyn.drift.h
    m = round(h / dt)
    const = np.asarray(doc["xi"]["constant"], dtype=float)
    from .dynamics import solve_dde
    xi = PastSegment(h, dt, np.tile(const, (m + 1, 1)))
    sol = solve_dde(dyn.drift, xi, T, dt)
    out = doc.get("output", {}).get("csv", "solution.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write(sol.to_csv())
    if not args.no_figures:
        fig = doc.get("output", {}).get("figure", str(Path(out).with_suffix(".png")))
        render_path_figure(sol.times, sol.values, fig, title="dde solution")
    print(f"solved on [{-h}, {T}] -> {out}")
    return 0


def cmd_simulate(args) -> int:
    from .config import build_dynamics
    from .dynamics import sample_levy, simulate_sde, simulate_sdde
    with open(args.config) as f:
        doc = json.load(f)
    dyn = build_dynamics(doc["dynamics"], "/dynamics")
    dt = float(doc["dt"])
    T = float(doc["T"])
    seed = int(doc["seed"])
    tid = int(doc.get("trajectory_id", 0))
    if dyn.type == "sde":
        y0 = np.asarray(doc["y0"], dtype=float)
        path = simulate_sde(dyn.drift, dyn.sigma, y0, T, dt, seed, tid)
    elif dyn.type == "sdde":
        h = dyn.drift.h
        m = round(h / dt)
        const = np.asarray(doc["xi"]["constant"], dtype=float)
        xi = PastSegment(h, dt, np.tile(const, (m + 1, 1)))
        path = simulate_sdde(dyn.drift, dyn.sigma, xi, T, dt, seed, tid)
    elif dyn.type == "levy_delay":
        path = sample_levy(dyn.levy, T, dt, seed, tid)
    else:
        raise ConfigError("/dynamics/type", f"cannot simulate {dyn.type!r}")
    out = doc.get("output", {}).get("csv", "trajectory.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        f.write(path.to_csv())
    if not args.no_figures:
        fig = doc.get("output", {}).get("figure", str(Path(out).with_suffix(".png")))
        render_path_figure(path.times, path.values, fig, title="trajectory")
    print(f"simulated {dyn.type} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathspace",
                                 description="path-space semigroup harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the checks of an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--no-figures", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="re-run checks along an axis")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=["dt", "n_paths", "t"])
    p_sweep.add_argument("--values", required=True, nargs="*", type=float)
    p_sweep.add_argument("--no-figures", action="store_true")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_j1 = sub.add_parser("j1", help="J1 distance between two serialized paths")
    p_j1.add_argument("path_a")
    p_j1.add_argument("path_b")
    p_j1.add_argument("--window", nargs=2, type=float, metavar=("A", "B"))
    p_j1.add_argument("--s-max", type=float, default=8.0)
    p_j1.add_argument("--quad-step", type=float, default=0.05)
    p_j1.add_argument("--max-matchings", type=int, default=5000)
    p_j1.add_argument("--slope-levels", type=int, default=5)
    p_j1.set_defaults(fn=cmd_j1)

    p_dde = sub.add_parser("solve-dde", help="integrate a delay equation")
    p_dde.add_argument("config")
    p_dde.add_argument("--no-figures", action="store_true")
    p_dde.set_defaults(fn=cmd_solve_dde)

    p_sim = sub.add_parser("simulate", help="simulate one trajectory")
    p_sim.add_argument("config")
    p_sim.add_argument("--no-figures", action="store_true")
    p_sim.set_defaults(fn=cmd_simulate)
    return ap


def main(argv=None) -> int:
    _threads_env()
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except PathspaceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
