"""Concrete path dynamics: deterministic delay equations and their evolution
maps, Euler-Maruyama kernels for SDEs and delay SDEs, compound-Poisson Levy
noise, and the noise-driven delay flow with its structural checks.

Numerical schemes are chosen for first-order accuracy and exact structural
identities rather than speed:

* discrete-delay drift uses the left-Riemann construction (it matches the
  noise-driven flow at zero noise node for node);
* history drift uses a drift-implicit Euler step, the implicitness resolved by
  two Picard iterations (stochastic variants share the same step, so a zero
  diffusion reproduces the deterministic solver exactly);
* all simulators are pure functions of (parameters, seed, trajectory id), with
  per-trajectory counter-based streams so partial ensembles and restarts are
  bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import KindMismatch, NonFiniteState, NonGridTime
from .paths import (GRID_RTOL, PastSegment, PathKind, SampledPath, _snap_units)
from .rng import make_stream

BLOWUP_GUARD = 1e12


# ---------------------------------------------------------------------------
# coefficient specifications
# ---------------------------------------------------------------------------


class BatchSegment:
    """Histories of a trajectory block on [-h, 0]: values (n, nodes, d)."""

    __slots__ = ("values", "dt", "h")

    def __init__(self, values: np.ndarray, dt: float, h: float):
        self.values = values
        self.dt = dt
        self.h = h

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    def at(self, s: float) -> np.ndarray:
        """Linear interpolation at s in [-h, 0]; clamped outside."""
        p = (s + self.h) / self.dt
        if p <= 0:
            return self.values[:, 0]
        if p >= self.n_nodes - 1:
            return self.values[:, -1]
        i = int(math.floor(p))
        frac = p - i
        if frac <= GRID_RTOL:
            return self.values[:, i]
        return (1.0 - frac) * self.values[:, i] + frac * self.values[:, i + 1]

    @property
    def value_at_zero(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass(frozen=True)
class PointwiseDrift:
    """b(y(t)); ``fn`` is vectorized over a leading trajectory axis."""

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz: float = 1.0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y), dtype=float)


@dataclass(frozen=True)
class HistoryDrift:
    """b(y_t) reading the h-history as a BatchSegment."""

    fn: Callable[[BatchSegment], np.ndarray]
    h: float
    lipschitz: float = 1.0

    def __call__(self, seg: BatchSegment) -> np.ndarray:
        return np.asarray(self.fn(seg), dtype=float)

    @staticmethod
    def from_pointwise(b: PointwiseDrift, h: float) -> "HistoryDrift":
        return HistoryDrift(lambda seg: b(seg.value_at_zero), h, b.lipschitz)


@dataclass(frozen=True)
class DiscreteDelayDrift:
    """b(y(t - delay)) with a pointwise-vectorized fn."""

    fn: Callable[[np.ndarray], np.ndarray]
    delay: float = 1.0
    lipschitz: float = 1.0

    def __call__(self, y_delayed: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y_delayed), dtype=float)


@dataclass(frozen=True)
class PointwiseDiffusion:
    """sigma(y(t)) -> (..., d, m)."""

    fn: Callable[[np.ndarray], np.ndarray]
    m: int

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(y), dtype=float)


@dataclass(frozen=True)
class HistoryDiffusion:
    fn: Callable[[BatchSegment], np.ndarray]
    h: float
    m: int

    def __call__(self, seg: BatchSegment) -> np.ndarray:
        return np.asarray(self.fn(seg), dtype=float)

    @staticmethod
    def from_pointwise(s: PointwiseDiffusion, h: float) -> "HistoryDiffusion":
        return HistoryDiffusion(lambda seg: s(seg.value_at_zero), h, s.m)


def constant_diffusion(matrix) -> PointwiseDiffusion:
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    d, m = mat.shape
    return PointwiseDiffusion(lambda y: np.broadcast_to(mat, y.shape[:-1] + (d, m)), m)


def validate_lipschitz(fn: Callable, declared: float, probes: np.ndarray,
                       factor: float = 1.1) -> float:
    """Ratio test on probe pairs; raises if the declared constant is exceeded
    by more than ``factor``.  Probabilistic evidence, not a proof."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    worst = 0.0
    for i in range(len(probes) - 1):
        a, b = probes[i], probes[i + 1]
        gap = float(np.linalg.norm(a - b))
        if gap < 1e-12:
            continue
        ratio = float(np.linalg.norm(np.asarray(fn(a)) - np.asarray(fn(b)))) / gap
        worst = max(worst, ratio)
    if worst > declared * factor:
        raise ValueError(f"observed Lipschitz ratio {worst:.3g} exceeds declared "
                         f"{declared} by more than {factor}x")
    return worst


def validate_nondegenerate(sigma: HistoryDiffusion, segments: Sequence[BatchSegment]) -> float:
    """sup ||sigma(xi)^{-1}|| over probe histories (finite required)."""
    worst = 0.0
    for seg in segments:
        mats = sigma(seg)
        for mat in mats.reshape(-1, mats.shape[-2], mats.shape[-1]):
            inv = np.linalg.inv(mat)
            worst = max(worst, float(np.linalg.norm(inv, 2)))
    return worst


def _guard(values: np.ndarray):
    if not np.all(np.isfinite(values)) or np.any(np.abs(values) > BLOWUP_GUARD):
        raise NonFiniteState("state exceeded the blow-up guard")


# ---------------------------------------------------------------------------
# deterministic delay equations
# ---------------------------------------------------------------------------


def _delay_horizon(b) -> float:
    if isinstance(b, DiscreteDelayDrift):
        return b.delay
    if isinstance(b, HistoryDrift):
        return b.h
    raise TypeError("solve_dde needs a history or discrete-delay drift")


def solve_dde(b, xi: PastSegment, T: float, dt: float) -> SampledPath:
    """Integrate y' = b(y_t), y_0 = xi on [0, T]; returns the path on [-h, T].

    Discrete-delay drifts use the exact left-Riemann construction; history
    drifts take a drift-implicit Euler step resolved by two Picard iterations.
    """
    h = _delay_horizon(b)
    m = _snap_units(h, dt, "delay horizon")
    n = _snap_units(T, dt, "horizon")
    if abs(xi.dt - dt) > GRID_RTOL * dt:
        # resample the history onto the solver grid
        hist = np.stack([xi.at(-h + j * dt) for j in range(m + 1)])
    else:
        hist = np.asarray(xi.values[-(m + 1):])
        if hist.shape[0] != m + 1:
            hist = np.stack([xi.at(-h + j * dt) for j in range(m + 1)])
    d = hist.shape[1]
    vals = np.empty((m + n + 1, d))
    vals[:m + 1] = hist
    if isinstance(b, DiscreteDelayDrift):
        lag = _snap_units(b.delay, dt, "delay")
        for k in range(n):
            i = m + k
            vals[i + 1] = vals[i] + dt * b(vals[i - lag])
            _guard(vals[i + 1])
    else:
        for k in range(n):
            i = m + k
            cand = vals[i]
            for _ in range(2):
                vals[i + 1] = cand
                seg = BatchSegment(vals[None, i + 1 - m:i + 2], dt, h)
                cand = vals[i] + dt * b(seg)[0]
            vals[i + 1] = cand
            _guard(vals[i + 1])
    return SampledPath(PathKind.Continuous, -h, dt, vals)


def evolution_map_dde(b, x: SampledPath) -> SampledPath:
    """Deterministic future-completion: past kept, future solved from the
    h-history at time 0.  The result shares x's window."""
    if x.kind is not PathKind.Continuous:
        raise KindMismatch("delay evolution maps act on continuous paths")
    h = _delay_horizon(b)
    if x.t_min > -h + GRID_RTOL * x.dt:
        raise NonGridTime(f"window must cover [-{h}, 0]")
    xi = x.past_segment(0.0, h)
    sol = solve_dde(b, xi, x.t_max, x.dt)
    i0 = x.node_index(0.0)
    v = np.array(x.values)
    for k in range(i0, x.n_nodes):
        v[k] = sol.evaluate(x.t_min + k * x.dt)
    return x.with_values(v)


class DelayEvolutionMap:
    """The evolution map of a delay equation as a reusable callable."""

    def __init__(self, b):
        self.b = b
        self.h = _delay_horizon(b)

    def __call__(self, x: SampledPath) -> SampledPath:
        return evolution_map_dde(self.b, x)


def residual_sup(a: SampledPath, b: SampledPath) -> float:
    """Max euclidean deviation over the common grid nodes."""
    lo = max(a.t_min, b.t_min)
    hi = min(a.t_max, b.t_max)
    n = int(round((hi - lo) / a.dt))
    return max(float(np.linalg.norm(a.evaluate(lo + k * a.dt) - b.evaluate(lo + k * a.dt)))
               for k in range(n + 1))


@dataclass
class CheckReport:
    residuals: dict
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tolerance for v in self.residuals.values())


def check_evolution_map(phi, sample_paths: Sequence[SampledPath],
                        t_list: Sequence[float], tol: float) -> CheckReport:
    """Residuals of the evolution-map laws: past-only dependence, past
    preservation, and the flow property under shifts."""
    r_i = r_ii = r_iii = 0.0
    for x in sample_paths:
        px = phi(x)
        r_i = max(r_i, residual_sup(px, phi(x.stop())))
        r_ii = max(r_ii, residual_sup(px.stop(), x.stop()))
        for t in t_list:
            shifted = px.shift(t)
            r_iii = max(r_iii, residual_sup(phi(shifted), shifted))
    return CheckReport({"i_stop_input": r_i, "ii_past_preserved": r_ii,
                        "iii_flow": r_iii}, tol)


# ---------------------------------------------------------------------------
# stochastic simulators
# ---------------------------------------------------------------------------


def _increments(seed: int, trajectory_id: int, n_steps: int, m: int, dt: float,
                first_step: int, substream: int) -> np.ndarray:
    g = make_stream(seed, trajectory_id, substream)
    z = g.standard_normal((first_step + n_steps, m))
    return z[first_step:] * math.sqrt(dt)


def simulate_sde_block(b: PointwiseDrift, sigma: Optional[PointwiseDiffusion],
                       y0: np.ndarray, T: float, dt: float, seed: int,
                       trajectory_ids: Sequence[int], first_step: int = 0,
                       substream: int = 0) -> np.ndarray:
    """Euler-Maruyama block: returns values (n_traj, n_steps+1, d)."""
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n_traj, d = y0.shape
    n = _snap_units(T, dt, "horizon")
    m = sigma.m if sigma is not None else d
    dW = np.empty((n_traj, n, m))
    for r, tid in enumerate(trajectory_ids):
        dW[r] = _increments(seed, tid, n, m, dt, first_step, substream)
    out = np.empty((n_traj, n + 1, d))
    out[:, 0] = y0
    for k in range(n):
        y = out[:, k]
        noise = 0.0
        if sigma is not None:
            noise = np.einsum("ndm,nm->nd", sigma(y), dW[:, k])
        cand = y
        for _ in range(2):
            cand = y + dt * b(cand) + noise
        out[:, k + 1] = cand
        _guard(out[:, k + 1])
    return out


def simulate_sde(b: PointwiseDrift, sigma: Optional[PointwiseDiffusion],
                 y0, T: float, dt: float, seed: int, trajectory_id: int = 0,
                 first_step: int = 0, substream: int = 0) -> SampledPath:
    vals = simulate_sde_block(b, sigma, np.atleast_2d(y0), T, dt, seed,
                              [trajectory_id], first_step, substream)[0]
    return SampledPath(PathKind.Continuous, 0.0, dt, vals)


def simulate_sdde_block(b: HistoryDrift, sigma: Optional[HistoryDiffusion],
                        xi_values: np.ndarray, T: float, dt: float, seed: int,
                        trajectory_ids: Sequence[int], first_step: int = 0,
                        substream: int = 0) -> np.ndarray:
    """Delay Euler-Maruyama block; xi_values (n_traj, m+1, d) is the history
    on [-h, 0].  Returns values (n_traj, m+n+1, d) on [-h, T]."""
    h = b.h
    mm = round(h / dt)
    xi_values = np.asarray(xi_values, dtype=float)
    n_traj, m_nodes, d = xi_values.shape
    if m_nodes != mm + 1:
        raise NonGridTime("history nodes must match h/dt + 1")
    n = _snap_units(T, dt, "horizon")
    n_noise = sigma.m if sigma is not None else d
    dW = np.empty((n_traj, n, n_noise))
    for r, tid in enumerate(trajectory_ids):
        dW[r] = _increments(seed, tid, n, n_noise, dt, first_step, substream)
    vals = np.empty((n_traj, mm + n + 1, d))
    vals[:, :mm + 1] = xi_values
    for k in range(n):
        i = mm + k
        y = vals[:, i]
        noise = 0.0
        if sigma is not None:
            seg_now = BatchSegment(vals[:, i - mm:i + 1], dt, h)
            noise = np.einsum("ndm,nm->nd", sigma(seg_now), dW[:, k])
        cand = y
        for _ in range(2):
            vals[:, i + 1] = cand
            seg_next = BatchSegment(vals[:, i + 1 - mm:i + 2], dt, h)
            cand = y + dt * b(seg_next) + noise
        vals[:, i + 1] = cand
        _guard(vals[:, i + 1])
    return vals


def simulate_sdde(b: HistoryDrift, sigma: Optional[HistoryDiffusion],
                  xi: PastSegment, T: float, dt: float, seed: int,
                  trajectory_id: int = 0, first_step: int = 0,
                  substream: int = 0) -> SampledPath:
    mm = _snap_units(b.h, dt, "delay horizon")
    hist = np.stack([xi.at(-b.h + j * dt) for j in range(mm + 1)])
    vals = simulate_sdde_block(b, sigma, hist[None], T, dt, seed,
                               [trajectory_id], first_step, substream)[0]
    return SampledPath(PathKind.Continuous, -b.h, dt, vals)


# ---------------------------------------------------------------------------
# Levy noise and the noise-driven delay flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianJump:
    mean: Tuple[float, ...]
    cov: Tuple[Tuple[float, ...], ...]

    def sample(self, g: np.random.Generator, n: int) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if n == 0:
            return np.zeros((0, mean.shape[0]))
        return g.multivariate_normal(mean, cov, size=n)


@dataclass(frozen=True)
class FixedJump:
    vector: Tuple[float, ...]

    def sample(self, g: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(np.asarray(self.vector, dtype=float), (n, 1))


@dataclass(frozen=True)
class LevySpec:
    """Drift + correlated Brownian + compound Poisson (finite activity)."""

    drift: Tuple[float, ...]
    brownian_cov: Tuple[Tuple[float, ...], ...]
    jump_rate: float
    jump_law: object | None = None

    @property
    def dim(self) -> int:
        return len(self.drift)


def sample_levy(spec: LevySpec, T: float, dt: float, seed: int,
                trajectory_id: int = 0, substream: int = 0) -> SampledPath:
    """A cadlag noise path on [0, T] starting at 0: drift t + Brownian on the
    grid + compound Poisson jumps snapped to the next grid node."""
    d = spec.dim
    n = _snap_units(T, dt, "horizon")
    g = make_stream(seed, trajectory_id, substream)
    drift = np.asarray(spec.drift, dtype=float)
    vals = np.zeros((n + 1, d))
    vals += drift * dt * np.arange(n + 1)[:, None]
    cov = np.asarray(spec.brownian_cov, dtype=float)
    if np.any(cov):
        L = np.linalg.cholesky(cov)
        bw = (g.standard_normal((n, d)) * math.sqrt(dt)) @ L.T
        vals[1:] += np.cumsum(bw, axis=0)
    if spec.jump_rate > 0:
        arrivals = []
        t = 0.0
        while True:
            t += g.exponential(1.0 / spec.jump_rate)
            if t >= T:
                break
            arrivals.append(t)
        jumps = spec.jump_law.sample(g, len(arrivals))
        for t_a, vec in zip(arrivals, jumps):
            node = min(int(math.ceil(t_a / dt - GRID_RTOL)), n)
            vals[node:] += vec
    vals[0] = 0.0
    return SampledPath(PathKind.Cadlag, 0.0, dt, vals)


def levy_delay_flow(b: DiscreteDelayDrift, omega: SampledPath,
                    x: SampledPath) -> SampledPath:
    """Pathwise solution of dy = b(y(t - delay)) dt + d omega, glued
    continuously at 0 (the value at 0 becomes x(0-)).

    The interval-by-interval construction is exact on the grid: the delayed
    integrand is piecewise constant on grid cells, so the left-Riemann sum is
    the integral itself.
    """
    if abs(omega.dt - x.dt) > GRID_RTOL * x.dt:
        raise NonGridTime("noise and path must share the grid step")
    dt = x.dt
    lag = _snap_units(b.delay, dt, "delay")
    i0 = x.node_index(0.0)
    if i0 < lag:
        raise NonGridTime(f"window must cover [-{b.delay}, 0]")
    j0 = omega.node_index(0.0)
    n = omega.n_nodes - 1 - j0
    d = x.dim
    res = np.empty((i0 + n + 1, d))
    res[:i0] = x.values[:i0]
    res[i0] = x.values[max(i0 - 1, 0)]
    om = omega.values
    for k in range(n):
        i = i0 + k
        res[i + 1] = res[i] + dt * b(res[i - lag]) + (om[j0 + k + 1] - om[j0 + k])
        _guard(res[i + 1])
    return SampledPath(PathKind.Cadlag, x.t_min, dt, res)


def check_random_evolution_map(phi, omega_samples: Sequence[SampledPath],
                               path_samples: Sequence[SampledPath],
                               t_list: Sequence[float], c_list: Sequence[np.ndarray],
                               tol: float) -> CheckReport:
    """Residuals of the random-evolution-map laws.

    (i) past-only dependence, (ii) past preservation, (iii) invariance under
    constant noise offsets, (iv) no anticipation (perturbing the noise after t
    leaves the path stopped at t unchanged), (v) the shift cocycle.  For (v)
    the caller should pick t where the noise has no jump in (t-dt, t]; at a
    noise jump the law itself only holds up to that jump.
    """
    r = {k: 0.0 for k in ("i_stop_input", "ii_past_preserved", "iii_offset",
                          "iv_adapted", "v_cocycle")}
    for om in omega_samples:
        for x in path_samples:
            px = phi(om, x)
            r["i_stop_input"] = max(r["i_stop_input"], residual_sup(px, phi(om, x.stop())))
            r["ii_past_preserved"] = max(r["ii_past_preserved"],
                                         residual_sup(px.stop(), x.stop()))
            for c in c_list:
                shifted_noise = om.with_values(om.values + np.asarray(c, dtype=float))
                r["iii_offset"] = max(r["iii_offset"], residual_sup(phi(shifted_noise, x), px))
            for t in t_list:
                bump = np.zeros(om.dim)
                bump[0] = 1.0
                mask = (om.times > t + GRID_RTOL * om.dt)[:, None]
                om_pert = om.with_values(om.values + bump * mask)
                r["iv_adapted"] = max(r["iv_adapted"],
                                      residual_sup(phi(om_pert, x).stop_at(t),
                                                   px.stop_at(t)))
                y = px.shift(t)
                z = phi(om.shift(t), y)
                r["v_cocycle"] = max(r["v_cocycle"], residual_sup(z, y))
    return CheckReport(r, tol)
