"""Skorokhod-style metrics on sampled paths.

``d_c`` is the locally-uniform metric for continuous paths (weighted series of
window sups, summable exactly because sampled paths are constant outside their
windows).  ``d_ab_j1`` is the J1 metric on a compact window, an infimum over
log-Lipschitz time changes: for piecewise-constant (cadlag grid) paths it is
computed by enumerating monotone matchings between the two jump sequences,
each matching inducing the piecewise-linear time change through the matched
pairs; for other paths a dynamic program over grid-knot time changes returns a
certified upper bound.  ``d_j1`` and ``d_minus_j1`` integrate window metrics
against an exponential weight; ``modulus`` is the cadlag modulus of continuity
over mesh-limited partitions and ``f_delta_bound`` the log-compression bound
for small shifts of widely-separated step paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, EmptyInterval, KindMismatch, NonGridTime, NotStopped, OutOfRange
from .paths import GRID_RTOL, PathKind, SampledPath

__all__ = [
    "SearchBudget", "TimeChange", "MetricValue", "d_state", "lip_cost", "d_c",
    "d_ab_j1", "d_j1", "d_minus_j1", "modulus", "f_delta_bound", "step_representation",
]


def d_state(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean distance capped at 1 (the path-space state metric)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes {x.shape} vs {y.shape}")
    return min(float(np.linalg.norm(x - y)), 1.0)


@dataclass(frozen=True)
class TimeChange:
    """Strictly increasing piecewise-linear bijection of [a, b] onto itself."""

    knots: Tuple[float, ...]
    images: Tuple[float, ...]

    def __post_init__(self):
        k, v = self.knots, self.images
        if len(k) != len(v) or len(k) < 2:
            raise ValueError("need matching knot/image sequences of length >= 2")
        if any(k[i + 1] <= k[i] for i in range(len(k) - 1)):
            raise ValueError("knots must be strictly increasing")
        if any(v[i + 1] <= v[i] for i in range(len(v) - 1)):
            raise ValueError("images must be strictly increasing")
        if k[0] != v[0] or k[-1] != v[-1]:
            raise ValueError("a time change fixes the window endpoints")

    @staticmethod
    def identity(a: float, b: float) -> "TimeChange":
        return TimeChange((a, b), (a, b))

    def __call__(self, t: float) -> float:
        k, v = self.knots, self.images
        if t <= k[0]:
            return v[0]
        if t >= k[-1]:
            return v[-1]
        i = int(np.searchsorted(np.asarray(k), t, side="right")) - 1
        s = (v[i + 1] - v[i]) / (k[i + 1] - k[i])
        return v[i] + s * (t - k[i])

    def inverse(self, u: float) -> float:
        k, v = self.knots, self.images
        if u <= v[0]:
            return k[0]
        if u >= v[-1]:
            return k[-1]
        i = int(np.searchsorted(np.asarray(v), u, side="right")) - 1
        s = (k[i + 1] - k[i]) / (v[i + 1] - v[i])
        return k[i] + s * (u - v[i])

    @property
    def slopes(self) -> np.ndarray:
        k = np.asarray(self.knots)
        v = np.asarray(self.images)
        return np.diff(v) / np.diff(k)


def lip_cost(lam: TimeChange) -> float:
    """sup over s<t of |log difference quotient|; attained on the linear pieces."""
    return float(np.max(np.abs(np.log(lam.slopes))))


@dataclass(frozen=True)
class MetricValue:
    value: float
    witness: Optional[TimeChange] = None
    is_upper_bound: bool = False
    tail_error: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "is_upper_bound": self.is_upper_bound,
            "tail_error": self.tail_error,
            "witness_knots": None if self.witness is None else
                [list(self.witness.knots), list(self.witness.images)],
        }


@dataclass(frozen=True)
class SearchBudget:
    max_matchings: int = 5000
    slope_levels: int = 5
    quad_step: float = 0.05
    s_max: float = 8.0


DEFAULT_BUDGET = SearchBudget()


# ---------------------------------------------------------------------------
# locally-uniform metric for continuous paths
# ---------------------------------------------------------------------------


def _merged_times(x: SampledPath, y: SampledPath, lo: float, hi: float) -> np.ndarray:
    ts = np.concatenate([x.times, y.times, [lo, hi]])
    ts = ts[(ts >= lo - GRID_RTOL) & (ts <= hi + GRID_RTOL)]
    return np.unique(np.clip(ts, lo, hi))


def _sup_on(x: SampledPath, y: SampledPath, lo: float, hi: float) -> float:
    ts = _merged_times(x, y, lo, hi)
    return max(d_state(x.evaluate(t), y.evaluate(t)) for t in ts)


def d_c(x: SampledPath, y: SampledPath, n_max: int = 30) -> float:
    """Weighted series sum 2^-n [1 and sup_{[-n,n]}]; the tail beyond n_max is
    added exactly using the constant extrapolation (the sup is eventually the
    global sup), so the value is monotone in n_max and exact once n_max covers
    both windows."""
    if x.kind is not PathKind.Continuous or y.kind is not PathKind.Continuous:
        raise KindMismatch("d_c is defined for continuous paths")
    if x.dim != y.dim:
        raise DimensionMismatch("state dimensions differ")
    lo = min(x.t_min, y.t_min) - 1.0
    hi = max(x.t_max, y.t_max) + 1.0
    s_global = _sup_on(x, y, lo, hi)
    total = 0.0
    for n in range(1, n_max + 1):
        total += 2.0 ** (-n) * min(_sup_on(x, y, -n, n), 1.0)
    total += 2.0 ** (-n_max) * min(s_global, 1.0)
    return total


# ---------------------------------------------------------------------------
# step representation of cadlag grid paths
# ---------------------------------------------------------------------------


def step_representation(x: SampledPath) -> Tuple[np.ndarray, np.ndarray]:
    """(jump_times, levels): levels[k] holds on [jump_times[k-1], jump_times[k]).

    Only meaningful for cadlag paths, whose sampled representation is exactly
    piecewise constant with jumps at grid nodes.
    """
    if x.kind is not PathKind.Cadlag:
        raise KindMismatch("step representation requires a cadlag path")
    v = x.values
    change = np.any(v[1:] != v[:-1], axis=1)
    idx = np.nonzero(change)[0] + 1
    times = x.t_min + x.dt * idx
    levels = np.concatenate([v[:1], v[idx]])
    return times, levels


# ---------------------------------------------------------------------------
# exact J1 window metric for step paths: monotone matching enumeration
# ---------------------------------------------------------------------------


def _value_index(times: np.ndarray, t: float, side: str = "right") -> int:
    return int(np.searchsorted(times, t, side=side))


def _matching_cost(a: float, b: float,
                   rx: np.ndarray, vx: np.ndarray, ry: np.ndarray, vy: np.ndarray,
                   mi: Sequence[int], mj: Sequence[int],
                   best: float) -> float:
    """Cost of the canonical time change through matched jump pairs.

    ``rx, vx`` is the full-line step representation of x (levels one longer
    than jump times), similarly ``ry, vy``; ``mi, mj`` index the matched jumps.
    Aborts early returning inf when the running cost exceeds ``best``.
    """
    k = len(mi)
    ts = [a] + [float(rx[i]) for i in mi] + [b]
    ls = [a] + [float(ry[j]) for j in mj] + [b]
    lip = 0.0
    for seg in range(k + 1):
        slope = (ls[seg + 1] - ls[seg]) / (ts[seg + 1] - ts[seg])
        al = abs(math.log(slope))
        if al > lip:
            lip = al
        if lip >= best:
            return math.inf
    # sweep the merged breakpoints of x and y∘lambda inside (a, b)
    ix = _value_index(rx, a)          # current x level index (jumps at a count)
    iy = _value_index(ry, a)
    ix_end = _value_index(rx, b, "left")   # x jumps strictly before b
    iy_end = _value_index(ry, b, "left")
    sup = _pair_distance(vx[ix], vy[iy])
    # positions: x jumps rx[ix..ix_end-1]; preimages of y jumps ry[iy..iy_end-1]
    px = rx[ix] if ix < ix_end else math.inf
    qy_pre = _preimage(ry[iy], ts, ls) if iy < iy_end else math.inf
    cx, cy = ix, iy
    tol = 1e-12 * max(1.0, abs(b - a))
    while px < math.inf or qy_pre < math.inf:
        if abs(px - qy_pre) <= tol:
            cx += 1
            cy += 1
            px = rx[cx] if cx < ix_end else math.inf
            qy_pre = _preimage(ry[cy], ts, ls) if cy < iy_end else math.inf
        elif px < qy_pre:
            cx += 1
            px = rx[cx] if cx < ix_end else math.inf
        else:
            cy += 1
            qy_pre = _preimage(ry[cy], ts, ls) if cy < iy_end else math.inf
        d = _pair_distance(vx[cx], vy[cy])
        if d > sup:
            sup = d
        if max(sup, lip) >= best:
            return math.inf
    # the point b itself (right values; jumps exactly at b included)
    d = _pair_distance(vx[_value_index(rx, b)], vy[_value_index(ry, b)])
    if d > sup:
        sup = d
    return max(lip, sup)


def _pair_distance(u: np.ndarray, v: np.ndarray) -> float:
    return min(float(np.linalg.norm(u - v)), 1.0)


def _preimage(q: float, ts: Sequence[float], ls: Sequence[float]) -> float:
    for seg in range(len(ls) - 1):
        if ls[seg] <= q <= ls[seg + 1]:
            return ts[seg] + (q - ls[seg]) * (ts[seg + 1] - ts[seg]) / (ls[seg + 1] - ls[seg])
    return math.inf


def _enumerate_window(x: SampledPath, y: SampledPath, a: float, b: float,
                      budget: SearchBudget) -> Optional[MetricValue]:
    rx, vx = step_representation(x)
    ry, vy = step_representation(y)
    in_x = [i for i, r in enumerate(rx) if a < r < b]
    in_y = [j for j, q in enumerate(ry) if a < q < b]
    p, m = len(in_x), len(in_y)
    if math.comb(p + m, p) > budget.max_matchings:
        return None
    best = math.inf
    best_match: Tuple[Tuple[int, ...], Tuple[int, ...]] = ((), ())
    for k in range(0, min(p, m) + 1):
        for mi in combinations(in_x, k):
            for mj in combinations(in_y, k):
                c = _matching_cost(a, b, rx, vx, ry, vy, mi, mj, best)
                if c < best:
                    best = c
                    best_match = (mi, mj)
    mi, mj = best_match
    knots = (a,) + tuple(float(rx[i]) for i in mi) + (b,)
    images = (a,) + tuple(float(ry[j]) for j in mj) + (b,)
    return MetricValue(best, TimeChange(knots, images), is_upper_bound=False)


# ---------------------------------------------------------------------------
# DP upper bound for general sampled paths
# ---------------------------------------------------------------------------


def _dp_steps(levels: int) -> List[Tuple[int, int]]:
    steps = []
    for du in range(1, levels + 1):
        for dv in range(1, levels + 1):
            if math.gcd(du, dv) == 1 and math.exp(-2.0) <= dv / du <= math.exp(2.0):
                steps.append((du, dv))
    return steps


def _dp_window(x: SampledPath, y: SampledPath, a: float, b: float,
               budget: SearchBudget) -> MetricValue:
    if abs(x.dt - y.dt) > GRID_RTOL * x.dt:
        raise NonGridTime("the DP bound needs a common grid step")
    dt = x.dt
    n = round((b - a) / dt)
    if n < 1 or abs((b - a) - n * dt) > GRID_RTOL:
        raise NonGridTime("window endpoints must be grid-aligned for the DP bound")
    steps = _dp_steps(budget.slope_levels)
    t0 = a
    D = np.full((n + 1, n + 1), np.inf)
    D[0, 0] = _pair_distance(x.evaluate(a), y.evaluate(a))
    back = {}
    for k in range(1, n + 1):
        for j in range(max(1, k - 5 * budget.slope_levels), n + 1):
            bestc, bestp = math.inf, None
            for du, dv in steps:
                pk, pj = k - du, j - dv
                if pk < 0 or pj < 0 or not np.isfinite(D[pk, pj]):
                    continue
                base = D[pk, pj]
                if base >= bestc:
                    continue
                c = max(base, abs(math.log(dv / du)),
                        _piece_sup(x, y, t0, dt, pk, pj, k, j))
                if c < bestc:
                    bestc, bestp = c, (pk, pj)
            if bestp is not None:
                D[k, j] = bestc
                back[(k, j)] = bestp
    cost = float(D[n, n])
    # reconstruct the witness
    knots, images = [b], [b]
    cur = (n, n)
    while cur != (0, 0) and cur in back:
        cur = back[cur]
        knots.append(t0 + cur[0] * dt)
        images.append(t0 + cur[1] * dt)
    knots.reverse()
    images.reverse()
    witness = TimeChange(tuple(_dedupe(knots)), tuple(_dedupe(images))) \
        if len(_dedupe(knots)) == len(_dedupe(images)) and len(_dedupe(knots)) >= 2 else None
    # the identity candidate is reachable in the DP ((1,1) steps), so cost <= sup
    return MetricValue(min(cost, 1.0), witness, is_upper_bound=True)


def _dedupe(seq):
    out = [seq[0]]
    for v in seq[1:]:
        if v > out[-1]:
            out.append(v)
    return out


def _piece_sup(x: SampledPath, y: SampledPath, t0: float, dt: float,
               k0: int, j0: int, k1: int, j1: int) -> float:
    """Sup of d(x(t), y(lambda(t))) on one linear piece, sampled at every
    breakpoint of either composition (exact for grid paths)."""
    ta, tb = t0 + k0 * dt, t0 + k1 * dt
    ua, ub = t0 + j0 * dt, t0 + j1 * dt
    slope = (ub - ua) / (tb - ta)
    pts = [ta + i * dt for i in range(0, k1 - k0 + 1)]
    pts += [ta + (ua + i * dt - ua) / slope for i in range(1, j1 - j0)]
    sup = 0.0
    for t in pts:
        d = _pair_distance(x.evaluate(t), y.evaluate(ua + slope * (t - ta)))
        if d > sup:
            sup = d
    return sup


# ---------------------------------------------------------------------------
# public window metric
# ---------------------------------------------------------------------------


def d_ab_j1(x: SampledPath, y: SampledPath, a: float, b: float,
            budget: SearchBudget = DEFAULT_BUDGET) -> MetricValue:
    """J1 distance of the restrictions to [a, b].

    Exact (with witness) for pairs of cadlag step paths whose in-window jump
    count fits the matching budget; otherwise a certified upper bound from the
    grid DP, never worse than the identity time change.
    """
    if not a < b:
        raise EmptyInterval(f"need a < b, got [{a}, {b}]")
    if x.dim != y.dim:
        raise DimensionMismatch("state dimensions differ")
    if x.kind is PathKind.Cadlag and y.kind is PathKind.Cadlag:
        res = _enumerate_window(x, y, a, b, budget)
        if res is not None:
            return res
    ident = MetricValue(min(_sup_on(x, y, a, b), 1.0), TimeChange.identity(a, b), True)
    try:
        dp = _dp_window(x, y, a, b, budget)
    except NonGridTime:
        return ident
    return dp if dp.value <= ident.value else ident


# ---------------------------------------------------------------------------
# whole-line metrics by exponential-weight quadrature
# ---------------------------------------------------------------------------


def _midpoints(s_max: float, h: float) -> np.ndarray:
    n = max(1, round(s_max / h))
    return (np.arange(n) + 0.5) * h


def d_j1(x: SampledPath, y: SampledPath, s_max: float = 8.0, quad_step: float = 0.05,
         budget: SearchBudget = DEFAULT_BUDGET) -> MetricValue:
    """Double integral of e^{s-t} d_s^t over s<=0<=t, midpoint rule.

    The neglected tail is at most 2 e^{-s_max} (the integrand is capped at 1
    and the full weight has mass 1); it is reported, not added to the value.
    """
    if not s_max > 0:
        raise OutOfRange("s_max must be positive")
    mids = _midpoints(s_max, quad_step)
    S = -mids[::-1]
    T = mids
    tail = 2.0 * math.exp(-s_max)
    if x.kind is PathKind.Cadlag and y.kind is PathKind.Cadlag:
        from ._j1_kernel import window_values
        vals, exact = window_values(x, y, S, T, budget)
        w = np.exp(S)[:, None] * np.exp(-T)[None, :] * quad_step ** 2
        return MetricValue(float(np.sum(w * vals)), None,
                           is_upper_bound=not exact, tail_error=tail)
    total = 0.0
    for s in S:
        for t in T:
            total += math.exp(s - t) * d_ab_j1(x, y, s, t, budget).value * quad_step ** 2
    return MetricValue(total, None, is_upper_bound=True, tail_error=tail)


def d_minus_j1(x: SampledPath, y: SampledPath, s_max: float = 8.0,
               quad_step: float = 0.05, budget: SearchBudget = DEFAULT_BUDGET) -> MetricValue:
    """Single integral of e^{-t} d_{-t}^0 for stopped paths."""
    if not x.is_stopped() or not y.is_stopped():
        raise NotStopped("d_minus_j1 requires stopped paths")
    mids = _midpoints(s_max, quad_step)
    tail = math.exp(-s_max)
    if x.kind is PathKind.Cadlag and y.kind is PathKind.Cadlag:
        from ._j1_kernel import window_values
        vals, exact = window_values(x, y, -mids, np.array([0.0]), budget)
        w = np.exp(-mids) * quad_step
        return MetricValue(float(np.dot(w, vals[:, 0])), None,
                           is_upper_bound=not exact, tail_error=tail)
    total = 0.0
    for t in mids:
        total += math.exp(-t) * d_ab_j1(x, y, -t, 0.0, budget).value * quad_step
    return MetricValue(total, None, is_upper_bound=True, tail_error=tail)


# ---------------------------------------------------------------------------
# cadlag modulus of continuity and the shift bound
# ---------------------------------------------------------------------------


def modulus(x: SampledPath, delta: float, T: float) -> float:
    """Infimum over grid partitions of [-T, T] with mesh >= delta of the max
    oscillation over half-open cells [t_{j-1}, t_j) (node values, right
    endpoint excluded), by dynamic programming over grid breakpoints."""
    if not (0 < delta < 2 * T):
        raise OutOfRange("need 0 < delta < 2T")
    dt = x.dt
    n = round(2 * T / dt)
    if abs(2 * T - n * dt) > GRID_RTOL or n < 1:
        raise NonGridTime("T must be grid-aligned")
    vals = np.stack([x.evaluate(-T + k * dt) for k in range(n + 1)])
    diff = vals[:, None, :] - vals[None, :, :]
    P = np.minimum(np.sqrt(np.sum(diff * diff, axis=-1)), 1.0)
    # osc[j, i] = max pairwise distance among nodes j..i-1
    osc = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        running = 0.0
        for i in range(j + 2, n + 2):
            running = max(running, float(np.max(P[j:i - 1, i - 2])))
            osc[j, i - 1] = running
    dstep = max(1, math.ceil(delta / dt - GRID_RTOL))
    D = np.full(n + 1, np.inf)
    D[0] = 0.0
    for i in range(dstep, n + 1):
        for j in range(0, i - dstep + 1):
            if np.isfinite(D[j]):
                c = max(D[j], osc[j, i])
                if c < D[i]:
                    D[i] = c
    return float(D[n])


def f_delta_bound(delta: float, t: float) -> float:
    """max(log(delta/(delta-|t|)), log(1+|t|/delta)); defined for |t| < delta."""
    if abs(t) >= delta:
        raise OutOfRange(f"|t|={abs(t)} must be < delta={delta}")
    return max(math.log(delta / (delta - abs(t))), math.log(1.0 + abs(t) / delta))
