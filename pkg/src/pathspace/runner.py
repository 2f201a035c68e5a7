"""Check dispatch: turns configured checks into report rows.

Each handler returns rows with the fixed report schema; a row's ``stat_kind``
says how to read the statistic: ``residual`` (want small), ``z`` (want inside
the +-tolerance band), ``detect`` (want the effect size to exceed the
threshold at 4 sigma), or ``error`` (numerical error vs an oracle value).
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Sequence

import numpy as np

from . import metrics
from .config import Experiment
from .dynamics import (DelayEvolutionMap, check_evolution_map,
                       check_random_evolution_map, levy_delay_flow,
                       sample_levy, solve_dde)
from .errors import ConfigError
from .observables import check_cocycle
from .paths import PastSegment, SampledPath
from .reporting import digest
from .semigroup import (LawReport, check_expectation_axioms,
                        check_finite_delay_invariance, check_homogeneity,
                        check_markov_reduction, check_multiplicativity,
                        check_semigroup_law, generator_probe,
                        induced_state_semigroup, richardson_extrapolate,
                        simplex_generator_check)


def _row(check: str, index: int, item: str, statistic: float, kind: str,
         tolerance: float, passed: bool, stderr=None) -> dict:
    return {"check": check, "index": index, "item": item,
            "statistic": float(statistic), "stat_kind": kind,
            "stderr": None if stderr is None else float(stderr),
            "tolerance": float(tolerance), "passed": bool(passed)}


def _law_rows(rep_list: Sequence[LawReport], check: str, index: int) -> List[dict]:
    rows = []
    for rep in rep_list:
        rows.append(_row(check, index, rep.name, rep.statistic, rep.kind,
                         rep.tolerance, rep.passed,
                         rep.details.get("stderr")))
    return rows


def _need(exp: Experiment, c: dict, key: str, loc: str):
    if key not in c:
        raise ConfigError(f"{loc}/{key}", "missing required field")
    return c[key]


def _path(exp: Experiment, name: str, loc: str) -> SampledPath:
    if name not in exp.paths:
        raise ConfigError(loc, f"unknown path {name!r}")
    return exp.paths[name]


def _obs(exp: Experiment, name: str, loc: str):
    if name not in exp.observables:
        raise ConfigError(loc, f"unknown observable {name!r}")
    return exp.observables[name]


def _func(exp: Experiment, name: str, loc: str):
    if name not in exp.functions:
        raise ConfigError(loc, f"unknown function {name!r}")
    return exp.functions[name]


def _spec(exp: Experiment, loc: str):
    if exp.spec is None:
        raise ConfigError(loc, "this check needs an /expectation section")
    return exp.spec


def _dyn(exp: Experiment, c: dict, loc: str, want: str):
    name = _need(exp, c, "dynamics", loc)
    if name not in exp.dynamics:
        raise ConfigError(f"{loc}/dynamics", f"unknown dynamics {name!r}")
    d = exp.dynamics[name]
    if d.type != want:
        raise ConfigError(f"{loc}/dynamics", f"need {want} dynamics, got {d.type}")
    return d


# --- handlers ---------------------------------------------------------------


def _h_expectation_axioms(exp, c, i, loc):
    spec = _spec(exp, loc)
    pairs = [( _obs(exp, a, f"{loc}/pairs"), _obs(exp, b, f"{loc}/pairs") )
             for a, b in _need(exp, c, "pairs", loc)]
    paths = [_path(exp, n, f"{loc}/paths") for n in _need(exp, c, "paths", loc)]
    tol = float(c.get("tolerance", 1e-12))
    return _law_rows(check_expectation_axioms(spec, pairs, paths, tol),
                     "expectation_axioms", i)


def _h_homogeneity(exp, c, i, loc):
    spec = _spec(exp, loc)
    rep = check_homogeneity(spec, _obs(exp, _need(exp, c, "observable", loc), loc),
                            _path(exp, _need(exp, c, "path", loc), loc),
                            float(_need(exp, c, "t", loc)),
                            int(c.get("n_outer", 200)), int(c.get("n_inner", 500)),
                            float(c.get("tolerance", 4.0)))
    return _law_rows([rep], "homogeneity", i)


def _h_semigroup_law(exp, c, i, loc):
    spec = _spec(exp, loc)
    rep = check_semigroup_law(spec, _obs(exp, _need(exp, c, "observable", loc), loc),
                              _path(exp, _need(exp, c, "path", loc), loc),
                              float(_need(exp, c, "s", loc)), float(_need(exp, c, "t", loc)),
                              int(c.get("n_outer", 200)), int(c.get("n_inner", 500)),
                              float(c.get("tolerance", 4.0)))
    return _law_rows([rep], "semigroup_law", i)


def _h_markov_reduction(exp, c, i, loc):
    spec = _spec(exp, loc)
    names = _need(exp, c, "paths", loc)
    pair = (_path(exp, names[0], loc), _path(exp, names[1], loc))
    rep = check_markov_reduction(spec, _func(exp, _need(exp, c, "function", loc), loc),
                                 float(_need(exp, c, "t", loc)), pair,
                                 float(c.get("tolerance", 1e-12)))
    mode = c.get("mode", "zero")
    if mode == "zero":
        return _law_rows([rep], "markov_reduction", i)
    threshold = float(_need(exp, c, "threshold", loc))
    diff = abs(rep.details["difference"])
    se = rep.details["stderr"]
    passed = diff - 4.0 * se >= threshold
    return [_row("markov_reduction", i, "detect", diff, "detect", threshold,
                 passed, se)]


def _h_multiplicativity(exp, c, i, loc):
    spec = _spec(exp, loc)
    rep = check_multiplicativity(spec, _obs(exp, _need(exp, c, "F", loc), loc),
                                 _obs(exp, _need(exp, c, "G", loc), loc),
                                 _path(exp, _need(exp, c, "path", loc), loc),
                                 float(c.get("tolerance", 4.0)))
    mode = c.get("mode", "zero")
    if mode == "detect":
        passed = abs(rep.statistic) >= rep.tolerance
        return [_row("multiplicativity", i, "detect", rep.statistic, "detect",
                     rep.tolerance, passed, rep.details.get("stderr"))]
    return _law_rows([rep], "multiplicativity", i)


def _h_finite_delay(exp, c, i, loc):
    spec = _spec(exp, loc)
    names = _need(exp, c, "paths", loc)
    pair = (_path(exp, names[0], loc), _path(exp, names[1], loc))
    rows = []
    for t in c.get("t_list", [c.get("t", 1.0)]):
        rep = check_finite_delay_invariance(
            spec, _obs(exp, _need(exp, c, "observable", loc), loc), float(t),
            pair, float(c.get("tolerance", 1e-12)))
        rows += _law_rows([rep], "finite_delay_invariance", i)
    return rows


def _h_evolution_map(exp, c, i, loc):
    dyn = _dyn(exp, c, loc, "dde")
    phi = DelayEvolutionMap(dyn.drift)
    paths = [_path(exp, n, f"{loc}/paths") for n in _need(exp, c, "paths", loc)]
    rep = check_evolution_map(phi, paths, [float(t) for t in c.get("t_list", [0.5])],
                              float(c.get("tolerance", 1e-8)))
    return [_row("evolution_map", i, k, v, "residual", rep.tolerance,
                 v <= rep.tolerance) for k, v in rep.residuals.items()]


def _h_random_evolution_map(exp, c, i, loc):
    dyn = _dyn(exp, c, loc, "levy_delay")
    dt = float(_need(exp, c, "dt", loc))
    T = float(_need(exp, c, "T", loc))
    n_omega = int(c.get("n_omega", 3))
    omegas = [sample_levy(dyn.levy, T, dt, exp.seed, k, substream=9)
              for k in range(n_omega)]
    paths = [_path(exp, n, f"{loc}/paths") for n in _need(exp, c, "paths", loc)]
    phi = lambda om, x: levy_delay_flow(dyn.drift, om, x)
    rep = check_random_evolution_map(
        phi, omegas, paths, [float(t) for t in c.get("t_list", [1.0])],
        [np.asarray(v, dtype=float) for v in c.get("c_list", [[1.0]])],
        float(c.get("tolerance", 10 * dt)))
    return [_row("random_evolution_map", i, k, v, "residual", rep.tolerance,
                 v <= rep.tolerance) for k, v in rep.residuals.items()]


def _h_cocycle(exp, c, i, loc):
    res = check_cocycle(_obs(exp, _need(exp, c, "observable", loc), loc),
                        _path(exp, _need(exp, c, "path", loc), loc),
                        float(_need(exp, c, "t", loc)),
                        float(c.get("quad_step", 1e-3)))
    tol = float(c.get("tolerance", 1e-3))
    return [_row("cocycle", i, "residual", res, "residual", tol, res <= tol)]


def _h_generator_probe(exp, c, i, loc):
    spec = _spec(exp, loc)
    rows_out = []
    table = generator_probe(spec, _obs(exp, _need(exp, c, "observable", loc), loc),
                            _path(exp, _need(exp, c, "path", loc), loc),
                            [float(t) for t in _need(exp, c, "t_list", loc)])
    extrap = richardson_extrapolate(table)
    if "target" in c:
        target = float(c["target"])
        band = c.get("band", {})
        se = max(r["stderr"] for r in table)
        tol = float(band.get("abs", 0.0)) + float(band.get("stderr_mult", 4.0)) * se
        err = abs(extrap - target)
        rows_out.append(_row("generator_probe", i, "extrapolated_error", err,
                             "error", tol, err <= tol, se))
    else:
        rows_out.append(_row("generator_probe", i, "extrapolated", extrap,
                             "info", math.inf, True))
    return rows_out


def _h_state_semigroup(exp, c, i, loc):
    spec = _spec(exp, loc)
    est = induced_state_semigroup(spec, _func(exp, _need(exp, c, "function", loc), loc),
                                  float(_need(exp, c, "t", loc)),
                                  np.asarray(_need(exp, c, "x0", loc), dtype=float))
    target = float(_need(exp, c, "target", loc))
    band = c.get("band", {})
    tol = float(band.get("abs", 0.0)) + float(band.get("stderr_mult", 4.0)) * est.stderr
    err = abs(est.mean - target)
    return [_row("state_semigroup", i, f"t={c['t']}", err, "error", tol,
                 err <= tol, est.stderr)]


def _h_solve_points(exp, c, i, loc):
    dyn = _dyn(exp, c, loc, "dde")
    dt = float(_need(exp, c, "dt", loc))
    T = float(_need(exp, c, "T", loc))
    xi_def = _need(exp, c, "xi", loc)
    h = dyn.drift.delay if hasattr(dyn.drift, "delay") else dyn.drift.h
    m = round(h / dt)
    const = np.asarray(xi_def["constant"], dtype=float)
    xi = PastSegment(h, dt, np.tile(const, (m + 1, 1)))
    sol = solve_dde(dyn.drift, xi, T, dt)
    tol = float(c.get("tolerance_mult_dt", 5.0)) * dt
    rows = []
    for pt in _need(exp, c, "points", loc):
        err = float(np.linalg.norm(sol.evaluate(float(pt["t"]))
                                   - np.asarray(pt["value"], dtype=float)))
        rows.append(_row("solve_points", i, f"t={pt['t']}", err, "error",
                         tol, err <= tol))
    return rows


def _h_simplex_generator(exp, c, i, loc):
    spec = _spec(exp, loc)
    fs = [_func(exp, n, f"{loc}/functions") for n in _need(exp, c, "functions", loc)]
    rep = simplex_generator_check(spec, fs, float(_need(exp, c, "a", loc)),
                                  float(_need(exp, c, "b", loc)),
                                  _path(exp, _need(exp, c, "path", loc), loc),
                                  float(_need(exp, c, "dt_fd", loc)),
                                  float(c.get("tolerance", 4.0)),
                                  n=c.get("n_paths"))
    return _law_rows([rep], "simplex_generator", i)


def _h_metric_shift_bound(exp, c, i, loc):
    x = _path(exp, _need(exp, c, "path", loc), loc)
    t = float(_need(exp, c, "t", loc))
    delta = float(_need(exp, c, "delta", loc))
    mv = metrics.d_j1(x, x.shift(t), float(c.get("s_max", 8.0)),
                      float(c.get("quad_step", 0.05)))
    bound = metrics.f_delta_bound(delta, t)
    extra = float(c.get("tolerance", 1e-3))
    excess = mv.value - bound
    return [_row("metric_shift_bound", i, f"t={t}", excess, "residual", extra,
                 excess <= extra)]


def _h_metric_axioms(exp, c, i, loc):
    names = _need(exp, c, "paths", loc)
    ps = [_path(exp, n, f"{loc}/paths") for n in names]
    s_max = float(c.get("s_max", 6.0))
    qs = float(c.get("quad_step", 0.1))
    sym = 0.0
    tri = 0.0
    vals = {}
    for a in range(len(ps)):
        for b in range(len(ps)):
            if a < b:
                vab = metrics.d_j1(ps[a], ps[b], s_max, qs).value
                vba = metrics.d_j1(ps[b], ps[a], s_max, qs).value
                vals[(a, b)] = vab
                sym = max(sym, abs(vab - vba))
    for a in range(len(ps)):
        for b in range(len(ps)):
            for cc in range(len(ps)):
                if a < b and b < cc:
                    dab = vals[(a, b)]
                    dbc = vals[(b, cc)]
                    dac = vals[(a, cc)]
                    tri = max(tri, dac - dab - dbc)
    tol_sym = float(c.get("tolerance_symmetry", 1e-12))
    tol_tri = float(c.get("tolerance_triangle", 2 * (2 * math.exp(-s_max) + qs)))
    return [_row("metric_axioms", i, "symmetry", sym, "residual", tol_sym, sym <= tol_sym),
            _row("metric_axioms", i, "triangle", tri, "residual", tol_tri, tri <= tol_tri)]


HANDLERS: Dict[str, Callable] = {
    "expectation_axioms": _h_expectation_axioms,
    "homogeneity": _h_homogeneity,
    "semigroup_law": _h_semigroup_law,
    "markov_reduction": _h_markov_reduction,
    "multiplicativity": _h_multiplicativity,
    "finite_delay_invariance": _h_finite_delay,
    "evolution_map": _h_evolution_map,
    "random_evolution_map": _h_random_evolution_map,
    "cocycle": _h_cocycle,
    "generator_probe": _h_generator_probe,
    "state_semigroup": _h_state_semigroup,
    "solve_points": _h_solve_points,
    "simplex_generator": _h_simplex_generator,
    "metric_shift_bound": _h_metric_shift_bound,
    "metric_axioms": _h_metric_axioms,
}


def run_checks(exp: Experiment) -> List[dict]:
    rows: List[dict] = []
    for i, c in enumerate(exp.checks):
        loc = f"/checks/{i}"
        handler = HANDLERS[c["check"]]
        new_rows = handler(exp, c, i, loc)
        dg = digest(c)
        for r in new_rows:
            r["digest"] = dg
        rows.extend(new_rows)
    return rows
