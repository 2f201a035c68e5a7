"""Experiment configuration: one flat JSON document per experiment.

The document names paths, test functions, observables and dynamics, picks an
expectation kind with its Monte Carlo budget, and lists checks with explicit
tolerances.  Everything is resolved eagerly so that configuration mistakes
surface as ``ConfigError`` with a JSON-pointer-ish location before anything
runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .dynamics import (DelayEvolutionMap, DiscreteDelayDrift, FixedJump,
                       GaussianJump, HistoryDiffusion, HistoryDrift, LevySpec,
                       PointwiseDiffusion, PointwiseDrift, constant_diffusion)
from .errors import ConfigError
from .observables import (BoundedPolynomial, Const, Coordinate, Cosine,
                          EvalNode, GaussianBump, IntegralNode, LeftLimNode,
                          Observable, Product, Scale, Sum, TestFunction)
from .paths import PathKind, SampledPath, constant_path, from_function, linear_path, step_path
from .semigroup import (DelayKind, DeterministicKind, ExpectationSpec,
                        LevyFlowKind, MarkovKind, MCConfig)


def _get(d: dict, key: str, loc: str, typ=None):
    if key not in d:
        raise ConfigError(f"{loc}/{key}", "missing required field")
    v = d[key]
    if typ is not None and not isinstance(v, typ):
        raise ConfigError(f"{loc}/{key}", f"expected {typ}, got {type(v).__name__}")
    return v


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


def build_path(defn: dict, loc: str) -> SampledPath:
    gen = _get(defn, "generator", loc, str)
    try:
        if gen == "values":
            return SampledPath(PathKind(_get(defn, "kind", loc, str)),
                               float(_get(defn, "t_min", loc)),
                               float(_get(defn, "dt", loc)),
                               np.asarray(_get(defn, "values", loc, list), dtype=float))
        kind = PathKind(defn.get("kind", "continuous"))
        t_min = float(_get(defn, "t_min", loc))
        t_max = float(_get(defn, "t_max", loc))
        dt = float(_get(defn, "dt", loc))
        if gen == "constant":
            return constant_path(defn["value"], kind, t_min, t_max, dt)
        if gen == "linear":
            return linear_path(defn["slope"], defn.get("intercept", 0.0), kind,
                               t_min, t_max, dt)
        if gen == "step":
            return step_path(defn["jump_times"], defn["levels"], t_min, t_max, dt)
        if gen == "harmonic":
            amp = np.atleast_1d(np.asarray(defn.get("amplitude", 1.0), dtype=float))
            freq = float(defn.get("freq", 1.0))
            phase = float(defn.get("phase", 0.0))
            off = np.atleast_1d(np.asarray(defn.get("offset", 0.0), dtype=float))
            return from_function(lambda t: amp * math.sin(freq * t + phase) + off,
                                 kind, t_min, t_max, dt)
        if gen == "harmonic_tail":
            # harmonic from `cut` onward, frozen at `tail_value` before it;
            # used to build path pairs differing only in the distant past
            amp = np.atleast_1d(np.asarray(defn.get("amplitude", 1.0), dtype=float))
            freq = float(defn.get("freq", 1.0))
            phase = float(defn.get("phase", 0.0))
            cut = float(_get(defn, "cut", loc))
            tail = np.atleast_1d(np.asarray(_get(defn, "tail_value", loc), dtype=float))

            def fn(t):
                if t >= cut:
                    return amp * math.sin(freq * t + phase)
                return tail

            return from_function(fn, kind, t_min, t_max, dt)
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(loc, f"invalid path definition: {e}") from e
    raise ConfigError(f"{loc}/generator", f"unknown generator {gen!r}")


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


def build_function(defn: dict, loc: str) -> TestFunction:
    typ = _get(defn, "type", loc, str)
    try:
        if typ == "cosine":
            return Cosine(tuple(defn.get("freq", [1.0])))
        if typ == "gaussian_bump":
            return GaussianBump(tuple(defn.get("center", [0.0])),
                                float(defn.get("width", 1.0)))
        if typ == "coordinate":
            return Coordinate(int(defn.get("index", 0)),
                              float(defn.get("clamp", 1e6)))
        if typ == "polynomial":
            return BoundedPolynomial(tuple(defn["coeffs"]),
                                     float(defn.get("clamp", 1.0)),
                                     int(defn.get("axis", 0)))
    except ConfigError:
        raise
    except Exception as e:
        raise ConfigError(loc, f"invalid function definition: {e}") from e
    raise ConfigError(f"{loc}/type", f"unknown function type {typ!r}")


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def build_observable(name: str, obs_defs: dict, funcs: Dict[str, TestFunction],
                     loc: str, _stack=()) -> Observable:
    if name in _stack:
        raise ConfigError(loc, f"cyclic observable reference {name!r}")
    if name not in obs_defs:
        raise ConfigError(loc, f"unknown observable {name!r}")
    d = obs_defs[name]
    here = f"{loc}/{name}"
    op = _get(d, "op", here, str)

    def fn(key="f"):
        fname = _get(d, key, here, str)
        if fname not in funcs:
            raise ConfigError(f"{here}/{key}", f"unknown function {fname!r}")
        return funcs[fname]

    def sub(n):
        return build_observable(n, obs_defs, funcs, loc, _stack + (name,))

    if op == "integral":
        return IntegralNode(fn(), float(_get(d, "a", here)), float(_get(d, "b", here)))
    if op == "eval":
        return EvalNode(fn(), float(_get(d, "t", here)))
    if op == "left_limit":
        return LeftLimNode(fn(), float(_get(d, "t", here)))
    if op == "const":
        return Const(float(_get(d, "value", here)))
    if op == "scale":
        return Scale(float(_get(d, "factor", here)), sub(_get(d, "arg", here, str)))
    if op == "product":
        return Product(tuple(sub(n) for n in _get(d, "args", here, list)))
    if op == "sum":
        return Sum(tuple(sub(n) for n in _get(d, "args", here, list)))
    raise ConfigError(f"{here}/op", f"unknown op {op!r}")


# ---------------------------------------------------------------------------
# coefficient registry and dynamics
# ---------------------------------------------------------------------------


def _pointwise_fn(defn: dict, loc: str) -> tuple[Callable, float]:
    name = _get(defn, "name", loc, str)
    if name == "zero":
        return (lambda y: np.zeros_like(y)), 0.0
    if name == "linear":
        A = np.asarray(_get(defn, "matrix", loc, list), dtype=float)
        return (lambda y: y @ A.T), float(np.linalg.norm(A, 2))
    if name == "tanh":
        s = float(defn.get("scale", 1.0))
        g = float(defn.get("gain", 1.0))
        return (lambda y: s * np.tanh(g * y)), abs(s * g)
    raise ConfigError(f"{loc}/name", f"unknown coefficient {name!r}")


def build_drift_pointwise(defn: dict, loc: str) -> PointwiseDrift:
    fn, lip = _pointwise_fn(defn, loc)
    return PointwiseDrift(fn, defn.get("lipschitz", lip))


def build_drift_history(defn: dict, loc: str) -> HistoryDrift:
    h = float(_get(defn, "h", loc))
    fn, lip = _pointwise_fn(defn, loc)
    delay = float(defn.get("delay", 0.0))
    if delay > 0:
        return HistoryDrift(lambda seg: fn(seg.at(-delay)), h,
                            defn.get("lipschitz", lip))
    return HistoryDrift(lambda seg: fn(seg.value_at_zero), h,
                        defn.get("lipschitz", lip))


def build_drift_discrete(defn: dict, loc: str) -> DiscreteDelayDrift:
    fn, lip = _pointwise_fn(defn, loc)
    return DiscreteDelayDrift(fn, float(defn.get("delay", 1.0)),
                              defn.get("lipschitz", lip))


def build_sigma_pointwise(defn: Optional[dict], loc: str) -> Optional[PointwiseDiffusion]:
    if defn is None or defn.get("name") == "zero":
        return None
    if defn.get("name") == "constant":
        return constant_diffusion(_get(defn, "matrix", loc, list))
    raise ConfigError(f"{loc}/name", f"unknown diffusion {defn.get('name')!r}")


def build_sigma_history(defn: Optional[dict], loc: str, h: float) -> Optional[HistoryDiffusion]:
    pw = build_sigma_pointwise(defn, loc)
    if pw is None:
        return None
    return HistoryDiffusion.from_pointwise(pw, h)


def build_levy(defn: dict, loc: str) -> LevySpec:
    law_def = defn.get("jump_law")
    law = None
    if law_def is not None:
        typ = _get(law_def, "type", f"{loc}/jump_law", str)
        if typ == "fixed":
            law = FixedJump(tuple(_get(law_def, "vector", f"{loc}/jump_law", list)))
        elif typ == "gaussian":
            law = GaussianJump(tuple(law_def.get("mean", [0.0])),
                               tuple(map(tuple, law_def.get("cov", [[1.0]]))))
        else:
            raise ConfigError(f"{loc}/jump_law/type", f"unknown jump law {typ!r}")
    rate = float(defn.get("jump_rate", 0.0))
    if rate > 0 and law is None:
        raise ConfigError(f"{loc}/jump_law", "jump_rate > 0 needs a jump_law")
    return LevySpec(tuple(_get(defn, "drift", loc, list)),
                    tuple(map(tuple, _get(defn, "brownian_cov", loc, list))),
                    rate, law)


@dataclass
class DynamicsDef:
    type: str
    drift: object
    sigma: object = None
    levy: Optional[LevySpec] = None


def build_dynamics(defn: dict, loc: str) -> DynamicsDef:
    typ = _get(defn, "type", loc, str)
    if typ == "dde":
        dd = _get(defn, "drift", loc, dict)
        if dd.get("kind", "discrete_delay") == "history":
            drift = build_drift_history(dd, f"{loc}/drift")
        else:
            drift = build_drift_discrete(dd, f"{loc}/drift")
        return DynamicsDef("dde", drift)
    if typ == "sde":
        return DynamicsDef("sde", build_drift_pointwise(_get(defn, "drift", loc, dict), f"{loc}/drift"),
                           build_sigma_pointwise(defn.get("sigma"), f"{loc}/sigma"))
    if typ == "sdde":
        drift = build_drift_history(_get(defn, "drift", loc, dict), f"{loc}/drift")
        sigma = build_sigma_history(defn.get("sigma"), f"{loc}/sigma", drift.h)
        return DynamicsDef("sdde", drift, sigma)
    if typ == "levy_delay":
        return DynamicsDef("levy_delay",
                           build_drift_discrete(_get(defn, "drift", loc, dict), f"{loc}/drift"),
                           levy=build_levy(_get(defn, "levy", loc, dict), f"{loc}/levy"))
    raise ConfigError(f"{loc}/type", f"unknown dynamics type {typ!r}")


# ---------------------------------------------------------------------------
# the experiment
# ---------------------------------------------------------------------------


@dataclass
class Experiment:
    name: str
    seed: int
    raw: dict
    paths: Dict[str, SampledPath]
    functions: Dict[str, TestFunction]
    observables: Dict[str, Observable]
    dynamics: Dict[str, DynamicsDef]
    spec: Optional[ExpectationSpec]
    checks: List[dict]
    output: dict


def _expectation_spec(doc: dict, dynamics: Dict[str, DynamicsDef],
                      seed: int) -> Optional[ExpectationSpec]:
    if "expectation" not in doc:
        return None
    e = doc["expectation"]
    loc = "/expectation"
    kind_name = _get(e, "kind", loc, str)
    dyn_name = _get(e, "dynamics", loc, str)
    if dyn_name not in dynamics:
        raise ConfigError(f"{loc}/dynamics", f"unknown dynamics {dyn_name!r}")
    dyn = dynamics[dyn_name]
    mc_def = _get(e, "mc", loc, dict)
    mc = MCConfig(int(_get(mc_def, "n_paths", f"{loc}/mc")),
                  int(mc_def.get("seed", seed)),
                  float(_get(mc_def, "dt", f"{loc}/mc")),
                  float(_get(mc_def, "horizon", f"{loc}/mc")))
    if kind_name == "deterministic":
        if dyn.type != "dde":
            raise ConfigError(f"{loc}/kind", "deterministic kind needs dde dynamics")
        return ExpectationSpec(DeterministicKind(DelayEvolutionMap(dyn.drift)), mc)
    if kind_name == "markov":
        if dyn.type != "sde":
            raise ConfigError(f"{loc}/kind", "markov kind needs sde dynamics")
        return ExpectationSpec(MarkovKind(dyn.drift, dyn.sigma), mc)
    if kind_name == "delay":
        if dyn.type != "sdde":
            raise ConfigError(f"{loc}/kind", "delay kind needs sdde dynamics")
        return ExpectationSpec(DelayKind(dyn.drift, dyn.sigma), mc)
    if kind_name == "levy_flow":
        if dyn.type != "levy_delay":
            raise ConfigError(f"{loc}/kind", "levy_flow kind needs levy_delay dynamics")
        return ExpectationSpec(LevyFlowKind(dyn.levy, dyn.drift), mc)
    raise ConfigError(f"{loc}/kind", f"unknown expectation kind {kind_name!r}")


KNOWN_CHECKS = {
    "expectation_axioms", "homogeneity", "semigroup_law", "markov_reduction",
    "multiplicativity", "finite_delay_invariance", "evolution_map",
    "random_evolution_map", "cocycle", "generator_probe", "state_semigroup",
    "solve_points", "simplex_generator", "metric_shift_bound", "metric_axioms",
}


def load_experiment(doc: dict) -> Experiment:
    if not isinstance(doc, dict):
        raise ConfigError("/", "top-level document must be an object")
    name = doc.get("name", "experiment")
    if "seed" not in doc:
        raise ConfigError("/seed", "missing required field")
    seed = int(doc["seed"])
    paths = {k: build_path(v, f"/paths/{k}") for k, v in doc.get("paths", {}).items()}
    funcs = {k: build_function(v, f"/functions/{k}")
             for k, v in doc.get("functions", {}).items()}
    obs_defs = doc.get("observables", {})
    observables = {k: build_observable(k, obs_defs, funcs, "/observables")
                   for k in obs_defs}
    dynamics = {k: build_dynamics(v, f"/dynamics/{k}")
                for k, v in doc.get("dynamics", {}).items()}
    spec = _expectation_spec(doc, dynamics, seed)
    checks = doc.get("checks", [])
    for i, c in enumerate(checks):
        cname = _get(c, "check", f"/checks/{i}", str)
        if cname not in KNOWN_CHECKS:
            raise ConfigError(f"/checks/{i}/check", f"unknown check {cname!r}")
    return Experiment(name, seed, doc, paths, funcs, observables, dynamics,
                      spec, checks, doc.get("output", {}))


def load_experiment_file(path: str) -> Experiment:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError("/", f"invalid JSON: {e}") from e
    return load_experiment(doc)
