"""Expectation operators, conditional variants, and the induced semigroup.

An expectation spec couples one of four future-generation mechanisms
(deterministic evolution map, Markov diffusion kernel, delay-diffusion kernel,
noise-driven delay flow) with a Monte Carlo budget.  The expectation of an
observable at a path x averages the observable over glued paths: the stopped
past of x continued by simulated futures started from the information the
kernel is allowed to read (the present value, the h-history, or the full past
for the deterministic map).

Equality-type laws are checked under common random numbers: both sides of an
identity see the same simulated futures, so identities that hold at the level
of the construction (projection, locality, stop-invariance, finite-delay
invariance, Markov reduction) hold exactly in finite samples, while genuinely
distributional laws (semigroup law, homogeneity) are reported as z-scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dynamics import (DiscreteDelayDrift, HistoryDiffusion, HistoryDrift,
                       LevySpec, PointwiseDiffusion, PointwiseDrift,
                       levy_delay_flow, sample_levy, simulate_sde_block,
                       simulate_sdde_block)
from .errors import (HorizonExceeded, KindMismatch, NotPastDetermined,
                     PathsDisagreeAtZero)
from .observables import (Const, LeftLimNode, Observable, TestFunction, Window,
                          apply, shift_obs)
from .paths import GRID_RTOL, PathKind, SampledPath, constant_path

PAST = Window.before(0.0)


def F_0star(f: TestFunction) -> Observable:
    """f evaluated at the present left limit; the past-determined avatar of
    point evaluation at 0 (equal to it on paths continuous at 0)."""
    return LeftLimNode(f, 0.0)


@dataclass(frozen=True)
class MCConfig:
    n_paths: int
    seed: int
    dt: float
    horizon: float

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


@dataclass(frozen=True)
class DeterministicKind:
    phi: Callable[[SampledPath], SampledPath]


@dataclass(frozen=True)
class MarkovKind:
    drift: PointwiseDrift
    diffusion: Optional[PointwiseDiffusion]


@dataclass(frozen=True)
class DelayKind:
    drift: HistoryDrift
    diffusion: Optional[HistoryDiffusion]

    @property
    def h(self) -> float:
        return self.drift.h


@dataclass(frozen=True)
class LevyFlowKind:
    levy: LevySpec
    drift: DiscreteDelayDrift


Kind = Union[DeterministicKind, MarkovKind, DelayKind, LevyFlowKind]


@dataclass(frozen=True)
class ExpectationSpec:
    kind: Kind
    mc: MCConfig

    @property
    def is_deterministic(self) -> bool:
        return isinstance(self.kind, DeterministicKind)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int
    seed: str

    def within(self, target: float, band: float) -> bool:
        return abs(self.mean - target) <= band


@dataclass
class LawReport:
    name: str
    statistic: float
    kind: str  # "residual" or "z"
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return abs(self.statistic) <= self.tolerance


# ---------------------------------------------------------------------------
# the sampling core
# ---------------------------------------------------------------------------

_BLOCK = 4096


def _glue(stopped: SampledPath, i0: int, future_values: np.ndarray) -> SampledPath:
    """concat(stopped, future) with the offset resolved by construction."""
    offset = stopped.values[i0] - future_values[0]
    v = np.concatenate([stopped.values[:i0 + 1], future_values[1:] + offset])
    return SampledPath(stopped.kind, stopped.t_min, stopped.dt, v)


def glued_futures(spec: ExpectationSpec, x: SampledPath, n: int,
                  substream: int = 0):
    """Yield glued paths (stopped past of x + simulated future), trajectory
    ids 0..n-1 on the given substream."""
    mc = spec.mc
    kind = spec.kind
    if isinstance(kind, DeterministicKind):
        yield kind.phi(x)
        return
    if isinstance(kind, LevyFlowKind):
        for tid in range(n):
            om = sample_levy(kind.levy, mc.horizon, mc.dt, mc.seed, tid, substream)
            yield levy_delay_flow(kind.drift, om, x)
        return
    stopped = x.stop()
    i0 = stopped.node_index(0.0)
    if isinstance(kind, MarkovKind):
        y0 = x.evaluate(0.0)
        for start in range(0, n, _BLOCK):
            ids = range(start, min(start + _BLOCK, n))
            y0s = np.tile(y0, (len(ids), 1))
            block = simulate_sde_block(kind.drift, kind.diffusion, y0s,
                                       mc.horizon, mc.dt, mc.seed, ids,
                                       substream=substream)
            for row in block:
                yield _glue(stopped, i0, row)
        return
    if isinstance(kind, DelayKind):
        h = kind.h
        xi = x.past_segment(0.0, h)
        mm = round(h / mc.dt)
        hist = np.stack([xi.at(-h + j * mc.dt) for j in range(mm + 1)])
        for start in range(0, n, _BLOCK):
            ids = range(start, min(start + _BLOCK, n))
            block = simulate_sdde_block(kind.drift, kind.diffusion,
                                        np.tile(hist, (len(ids), 1, 1)),
                                        mc.horizon, mc.dt, mc.seed, ids,
                                        substream=substream)
            for row in block:
                yield _glue(stopped, i0, row[mm:])
        return
    raise TypeError(f"unknown expectation kind {type(kind).__name__}")


def ensemble_values(spec: ExpectationSpec, observables: Sequence[Observable],
                    x: SampledPath, n: Optional[int] = None,
                    substream: int = 0) -> np.ndarray:
    """Matrix (n_observables, n_samples) of observable values on the glued
    ensemble; the ensemble is shared across observables (common random
    numbers)."""
    for F in observables:
        _check_horizon(spec, F)
    n = spec.mc.n_paths if n is None else n
    if spec.is_deterministic:
        n = 1
    out = np.empty((len(observables), n))
    for i, g in enumerate(glued_futures(spec, x, n, substream)):
        for j, F in enumerate(observables):
            out[j, i] = apply(F, g)
    return out


def _check_horizon(spec: ExpectationSpec, F: Observable):
    w = F.window
    if not w.is_empty and w.hi > spec.mc.horizon + GRID_RTOL:
        raise HorizonExceeded(
            f"observable window reaches {w.hi}, horizon is {spec.mc.horizon}")


def _estimate(values: np.ndarray, seed: str) -> MCEstimate:
    n = values.shape[0]
    mean = float(np.mean(values))
    stderr = 0.0 if n < 2 else float(np.std(values, ddof=1) / math.sqrt(n))
    return MCEstimate(mean, stderr, n, seed)


# ---------------------------------------------------------------------------
# the operators
# ---------------------------------------------------------------------------


def expectation(spec: ExpectationSpec, F: Observable, x: SampledPath,
                n: Optional[int] = None, substream: int = 0) -> MCEstimate:
    """Mean of F over the glued ensemble at x.

    Past-determined observables short-circuit to their exact value (the
    projection property): no paths are simulated and the stderr is 0.
    """
    if F.window.subset_of(PAST):
        return MCEstimate(apply(F, x), 0.0, 0, "exact-projection")
    _check_horizon(spec, F)
    if spec.is_deterministic:
        val = apply(F, spec.kind.phi(x))
        return MCEstimate(val, 0.0, 1, "deterministic")
    vals = ensemble_values(spec, [F], x, n, substream)[0]
    return _estimate(vals, f"seed={spec.mc.seed}/sub={substream}")


def conditional_expectation(spec: ExpectationSpec, F: Observable, x: SampledPath,
                            t: float, n: Optional[int] = None,
                            substream: int = 0) -> MCEstimate:
    """The conditional operator: shift by t, expect, shift back."""
    if t < 0:
        raise ValueError("conditional expectation needs t >= 0")
    return expectation(spec, shift_obs(F, -t, spec.mc.dt), x.shift(t), n, substream)


def semigroup_apply(spec: ExpectationSpec, t: float, F: Observable,
                    x: SampledPath, n: Optional[int] = None,
                    substream: int = 0) -> MCEstimate:
    """The induced semigroup at time t on past-determined observables."""
    if not F.window.subset_of(PAST):
        raise NotPastDetermined("the semigroup acts on past-determined "
                                "observables; compose with stop explicitly")
    if t < 0:
        raise ValueError("semigroup time must be >= 0")
    return expectation(spec, shift_obs(F, t, spec.mc.dt), x, n, substream)


@dataclass(frozen=True)
class Semigroup:
    """Callable handle for the induced semigroup of an expectation spec.

    ``T(t, F, x)`` on past-determined F; at t=0 it is the projection."""

    spec: ExpectationSpec

    def __call__(self, t: float, F: Observable, x: SampledPath,
                 n: Optional[int] = None, substream: int = 0) -> MCEstimate:
        return semigroup_apply(self.spec, t, F, x, n, substream)

    def expectation(self, F: Observable, x: SampledPath,
                    n: Optional[int] = None, substream: int = 0) -> MCEstimate:
        return expectation(self.spec, F, x, n, substream)

    def conditional(self, F: Observable, x: SampledPath, t: float,
                    n: Optional[int] = None, substream: int = 0) -> MCEstimate:
        return conditional_expectation(self.spec, F, x, t, n, substream)

    def generator_probe(self, F: Observable, x: SampledPath,
                        t_list: Sequence[float]) -> List[dict]:
        return generator_probe(self.spec, F, x, t_list)


def induced_state_semigroup(spec: ExpectationSpec, f: TestFunction, t: float,
                            x0, n: Optional[int] = None,
                            substream: int = 0) -> MCEstimate:
    """T(t)f(x0): the state-space semigroup read off the constant embedding."""
    if not isinstance(spec.kind, MarkovKind):
        raise KindMismatch("the induced state semigroup needs a Markov kind")
    dt = spec.mc.dt
    iota = constant_path(x0, PathKind.Continuous, -4 * dt, 0.0, dt)
    return semigroup_apply(spec, t, F_0star(f), iota, n, substream)


# ---------------------------------------------------------------------------
# law checks
# ---------------------------------------------------------------------------


def check_expectation_axioms(spec: ExpectationSpec,
                             observables: Sequence[Tuple[Observable, Observable]],
                             paths: Sequence[SampledPath],
                             tol: float = 1e-12) -> List[LawReport]:
    """Exact (common-random-number) residuals of the expectation axioms.

    ``observables`` is a list of pairs (F_past, G): F_past must be
    past-determined; G is arbitrary within the horizon.
    """
    r_stop = r_proj = r_loc = r_one = 0.0
    for x in paths:
        for F_past, G in observables:
            if not F_past.window.subset_of(PAST):
                raise NotPastDetermined("first element of each pair must be "
                                        "past-determined")
            ex = expectation(spec, G, x)
            ex_stop = expectation(spec, G, x.stop())
            r_stop = max(r_stop, abs(ex.mean - ex_stop.mean))
            r_proj = max(r_proj, abs(expectation(spec, F_past, x).mean
                                     - apply(F_past, x)))
            # per-sample residual keeps the identity exact in floating point
            vals = ensemble_values(spec, [F_past * G, G], x)
            fx = apply(F_past, x)
            r_loc = max(r_loc, abs(float(np.mean(vals[0] - fx * vals[1]))))
        ones = ensemble_values(spec, [Const(1.0)], x)
        r_one = max(r_one, abs(float(np.mean(ones[0])) - 1.0))
    return [
        LawReport("A_stop_invariance", r_stop, "residual", tol),
        LawReport("B_projection", r_proj, "residual", tol),
        LawReport("C_locality", r_loc, "residual", tol),
        LawReport("D_unit", r_one, "residual", tol),
    ]


def _nested_outer(spec: ExpectationSpec, x: SampledPath, n_outer: int,
                  substream: int = 2):
    return glued_futures(spec, x, n_outer, substream)


def check_homogeneity(spec: ExpectationSpec, F: Observable, x: SampledPath,
                      t: float, n_outer: int = 200, n_inner: int = 500,
                      tol: float = 4.0) -> LawReport:
    """Tower/restart consistency: E F vs E E_t F.

    Deterministic kinds are compared exactly (the flow property makes the
    restart bit-reproducible); stochastic kinds report the z-score of the
    nested estimator against the flat one.
    """
    if spec.is_deterministic:
        phi = spec.kind.phi
        z0 = phi(x)
        flat = apply(F, z0)
        w = phi(z0.shift(t))
        nested = apply(F, w.shift(-t))
        denom = max(1.0, abs(flat))
        return LawReport("homogeneity", abs(flat - nested) / denom, "residual", tol,
                         {"flat": flat, "nested": nested, "t": t})
    flat_vals = ensemble_values(spec, [F], x, n_outer * n_inner, substream=1)[0]
    flat = _estimate(flat_vals, "flat")
    G = shift_obs(F, -t, spec.mc.dt)
    inner_means = np.empty(n_outer)
    for i, g in enumerate(_nested_outer(spec, x, n_outer)):
        est = expectation(spec, G, g.shift(t), n=n_inner, substream=1000 + i)
        inner_means[i] = est.mean
    nested = _estimate(inner_means, "nested")
    se = math.hypot(flat.stderr, nested.stderr)
    z = (flat.mean - nested.mean) / se if se > 0 else 0.0
    return LawReport("homogeneity", z, "z", tol,
                     {"flat": flat.mean, "nested": nested.mean, "stderr": se, "t": t})


def check_semigroup_law(spec: ExpectationSpec, F: Observable, x: SampledPath,
                        s: float, t: float, n_outer: int = 200,
                        n_inner: int = 500, tol: float = 4.0) -> LawReport:
    """T(t+s)F vs T(t)[T(s)F], the inner value estimated on each outer
    sample's realized past.  The flat side shares the outer ensemble, so the
    edge cases s=0 and t=0 are exact identities."""
    if not F.window.subset_of(PAST):
        raise NotPastDetermined("F must be past-determined")
    if spec.is_deterministic:
        flat = semigroup_apply(spec, t + s, F, x).mean
        phi = spec.kind.phi
        inner = apply(shift_obs(F, s), phi(phi(x).shift(t)))
        denom = max(1.0, abs(flat))
        return LawReport("semigroup_law", abs(flat - inner) / denom, "residual",
                         tol, {"flat": flat, "nested": inner, "s": s, "t": t})
    Fts = shift_obs(F, t + s, spec.mc.dt)
    _check_horizon(spec, Fts)
    if t == 0:
        # T(0) is the identity on past-determined functionals (projection)
        return LawReport("semigroup_law", 0.0, "z", tol, {"s": s, "t": t})
    Fs = shift_obs(F, s, spec.mc.dt)
    flat_vals = np.empty(n_outer)
    inner_means = np.empty(n_outer)
    for i, g in enumerate(_nested_outer(spec, x, n_outer)):
        flat_vals[i] = apply(Fts, g)
        est = expectation(spec, Fs, g.shift(t), n=n_inner, substream=1000 + i)
        inner_means[i] = est.mean
    diffs = flat_vals - inner_means
    se = float(np.std(diffs, ddof=1) / math.sqrt(n_outer))
    z = float(np.mean(diffs)) / se if se > 0 else 0.0
    return LawReport("semigroup_law", z, "z", tol,
                     {"flat": float(np.mean(flat_vals)),
                      "nested": float(np.mean(inner_means)), "s": s, "t": t})


def check_markov_reduction(spec: ExpectationSpec, f: TestFunction, t: float,
                           x_pair: Tuple[SampledPath, SampledPath],
                           tol: float = 1e-12) -> LawReport:
    """CRN difference of T(t)F_0*(f) across two paths sharing the present.

    Exactly 0 for Markov kinds (the future reads only x(0)); for delay kinds
    the difference estimates the genuine history sensitivity, reported with
    the paired stderr.
    """
    x1, x2 = x_pair
    if float(np.linalg.norm(x1.evaluate(0.0) - x2.evaluate(0.0))) > 1e-12:
        raise PathsDisagreeAtZero("paths must agree at time 0")
    F = F_0star(f)
    Ft = shift_obs(F, t, spec.mc.dt)
    if t == 0:
        d = apply(F, x1) - apply(F, x2)  # T(0) is the projection
        return LawReport("markov_reduction", abs(d), "residual", tol,
                         {"difference": d, "stderr": 0.0, "t": 0.0})
    if spec.is_deterministic:
        d = abs(apply(Ft, spec.kind.phi(x1)) - apply(Ft, spec.kind.phi(x2)))
        return LawReport("markov_reduction", d, "residual", tol,
                         {"difference": d, "stderr": 0.0, "t": t})
    v1 = ensemble_values(spec, [Ft], x1)[0]
    v2 = ensemble_values(spec, [Ft], x2)[0]
    diffs = v1 - v2
    n = diffs.shape[0]
    mean = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return LawReport("markov_reduction", abs(mean), "residual", tol,
                     {"difference": mean, "stderr": se, "t": t})


def generator_probe(spec: ExpectationSpec, F: Observable, x: SampledPath,
                    t_list: Sequence[float]) -> List[dict]:
    """Difference quotients (T(t)F(x) - F(x))/t with stderrs, one row per t.

    Extrapolation t -> 0 is left to the caller.
    """
    base = apply(F, x)
    rows = []
    for t in t_list:
        est = semigroup_apply(spec, t, F, x)
        rows.append({"t": t, "quotient": (est.mean - base) / t,
                     "stderr": est.stderr / t, "n": est.n})
    return rows


def richardson_extrapolate(rows: Sequence[dict]) -> float:
    """First-order Richardson extrapolation from the two smallest t rows."""
    rs = sorted(rows, key=lambda r: r["t"])
    if len(rs) == 1:
        return rs[0]["quotient"]
    t0, t1 = rs[0]["t"], rs[1]["t"]
    q0, q1 = rs[0]["quotient"], rs[1]["quotient"]
    return q0 + (q0 - q1) * t0 / (t1 - t0)


def simplex_generator_check(spec: ExpectationSpec, f_list: Sequence[TestFunction],
                            a: float, b: float, x: SampledPath, dt_fd: float,
                            tol: float = 4.0, n: Optional[int] = None,
                            substream: int = 7) -> LawReport:
    """Ordered-simplex integrals of kernel marginals lie in the generator's
    domain; checks the forward difference of u against the boundary-term
    image, both on a shared ensemble.

    n=1: u = int_a^b T(s) f ds, image T(b)f - T(a)f.
    n=2: u = the ordered double integral, image the two boundary integrals.
    """
    if not isinstance(spec.kind, MarkovKind):
        raise KindMismatch("simplex check needs a Markov kind")
    order = len(f_list)
    if order not in (1, 2):
        raise ValueError("only n in {1, 2} is supported")
    if not 0 <= a < b:
        raise ValueError("need 0 <= a < b")
    mc = spec.mc
    dt = mc.dt
    n = mc.n_paths if n is None else n
    steps_fd = round(dt_fd / dt)
    if steps_fd < 1 or abs(dt_fd - steps_fd * dt) > GRID_RTOL:
        raise ValueError("dt_fd must be a grid multiple")
    horizon = b + dt_fd
    y0 = x.evaluate(0.0)
    fd_minus_image = []
    images = []
    for start in range(0, n, _BLOCK):
        ids = range(start, min(start + _BLOCK, n))
        y0s = np.tile(y0, (len(ids), 1))
        block = simulate_sde_block(spec.kind.drift, spec.kind.diffusion, y0s,
                                   horizon, dt, mc.seed, ids, substream=substream)
        ia, ib = round(a / dt), round(b / dt)
        f1 = np.asarray(f_list[0](block))
        if order == 1:
            u0 = np.trapezoid(f1[:, ia:ib + 1], dx=dt, axis=1)
            u1 = np.trapezoid(f1[:, ia + steps_fd:ib + steps_fd + 1], dx=dt, axis=1)
            image = f1[:, ib] - f1[:, ia]
        else:
            f2 = np.asarray(f_list[1](block))
            u0 = _ordered_double(f1, f2, ia, ib, dt)
            u1 = _ordered_double(f1, f2, ia + steps_fd, ib + steps_fd, dt)
            image = (np.trapezoid(f1[:, ia:ib + 1], dx=dt, axis=1) * f2[:, ib]
                     - f1[:, ia] * np.trapezoid(f2[:, ia:ib + 1], dx=dt, axis=1))
        fd_minus_image.append((u1 - u0) / dt_fd - image)
        images.append(image)
    dvals = np.concatenate(fd_minus_image)
    ivals = np.concatenate(images)
    mean = float(np.mean(dvals))
    se = float(np.std(dvals, ddof=1) / math.sqrt(len(dvals)))
    # the forward difference carries an O(dt_fd) bias; the band allows for it
    band = tol * se + dt_fd
    return LawReport("simplex_generator", abs(mean), "error", band,
                     {"mean": mean, "stderr": se,
                      "z": mean / se if se > 0 else 0.0, "order": order,
                      "image_mean": float(np.mean(ivals)),
                      "image_stderr": float(np.std(ivals, ddof=1) / math.sqrt(len(ivals)))})


def _ordered_double(f1: np.ndarray, f2: np.ndarray, ia: int, ib: int,
                    dt: float) -> np.ndarray:
    """Per-trajectory integral of f1(Y_s) f2(Y_t) over a<=s<=t<=b (trapezoid)."""
    seg1 = f1[:, ia:ib + 1]
    seg2 = f2[:, ia:ib + 1]
    cum = np.concatenate([np.zeros((seg1.shape[0], 1)),
                          np.cumsum((seg1[:, 1:] + seg1[:, :-1]) / 2 * dt, axis=1)],
                         axis=1)
    return np.trapezoid(seg2 * cum, dx=dt, axis=1)


def check_finite_delay_invariance(spec: ExpectationSpec, F: Observable, t: float,
                                  x_pair: Tuple[SampledPath, SampledPath],
                                  tol: float = 1e-12) -> LawReport:
    """T(t)F agrees (exactly, under CRN) on paths differing only before -h,
    for observables windowed inside [-h, 0)."""
    if isinstance(spec.kind, DelayKind):
        h = spec.kind.h
    elif isinstance(spec.kind, DeterministicKind):
        h = spec.kind.phi.h if hasattr(spec.kind.phi, "h") else None
    else:
        h = None
    if h is not None and not F.window.subset_of(Window(-h, 0.0, hi_open=True)):
        raise NotPastDetermined(f"F must be windowed inside [-{h}, 0)")
    x1, x2 = x_pair
    e1 = semigroup_apply(spec, t, F, x1)
    e2 = semigroup_apply(spec, t, F, x2)
    d = abs(e1.mean - e2.mean)
    return LawReport("finite_delay_invariance", d, "residual", tol,
                     {"t": t, "lhs": e1.mean, "rhs": e2.mean})


def check_multiplicativity(spec: ExpectationSpec, F: Observable, G: Observable,
                           x: SampledPath, tol: float = 4.0) -> LawReport:
    """Covariance detector for E(FG) - (EF)(EG) on shared samples.

    Deterministic kinds give exactly 0; a genuinely stochastic kernel is
    flagged at the reported z-score.
    """
    if spec.is_deterministic:
        g = spec.kind.phi(x)
        d = apply(F, g) * apply(G, g) - apply(F, g) * apply(G, g)
        return LawReport("multiplicativity", abs(d), "residual", tol,
                         {"difference": d})
    vals = ensemble_values(spec, [F, G], x)
    fv, gv = vals[0], vals[1]
    n = fv.shape[0]
    c = (fv - fv.mean()) * (gv - gv.mean())
    cov = float(np.sum(c) / (n - 1))
    se = float(np.std(c, ddof=1) / math.sqrt(n))
    z = cov / se if se > 0 else 0.0
    return LawReport("multiplicativity", z, "z", tol,
                     {"covariance": cov, "stderr": se})
