"""Grid-sampled paths on a finite window with the structural maps of a path space.

A path is a function R -> R^d held on a uniform grid ``t_min + i*dt``.  Two
interpolation conventions are supported: ``Continuous`` paths are piecewise
linear between nodes, ``Cadlag`` paths hold the left node's value on
``[t_i, t_{i+1})`` (right-continuous with left limits).  Outside the window the
path is extended by its boundary value, which makes evaluation, shifting and
stopping total operations.

State points are plain ``numpy`` arrays of shape ``(d,)``.  All operations are
pure; paths are immutable after construction.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    KindMismatch,
    NonGridShift,
    NonGridTime,
    PastNotStopped,
    WindowExcludesZero,
)

# Relative tolerance (in units of dt) for snapping times to the grid.
GRID_RTOL = 1e-9


class PathKind(Enum):
    Continuous = "continuous"
    Cadlag = "cadlag"


def _snap_units(t: float, dt: float, what: str = "time") -> int:
    """Return ``t/dt`` as an integer, or raise if off-grid beyond tolerance."""
    u = t / dt
    k = round(u)
    if abs(u - k) > GRID_RTOL * max(1.0, abs(u)):
        raise NonGridTime(f"{what} {t!r} is not a multiple of dt={dt!r}")
    return int(k)


@dataclass(frozen=True)
class SampledPath:
    kind: PathKind
    t_min: float
    dt: float
    values: np.ndarray  # shape (n, d), n >= 2

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array of shape (n, d)")
        if v.shape[0] < 2:
            raise ValueError("zero-length windows are rejected; need at least 2 nodes")
        if v.shape[1] < 1:
            raise DimensionMismatch("state dimension must be >= 1")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(v)):
            raise ValueError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # -- basic geometry -----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_max(self) -> float:
        return self.t_min + (self.n_nodes - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t_min + self.dt * np.arange(self.n_nodes)

    def _position(self, t: float) -> float:
        return (t - self.t_min) / self.dt

    def node_index(self, t: float, what: str = "time") -> int:
        """Grid index of ``t``; raises ``NonGridTime`` if off-grid or outside."""
        p = self._position(t)
        k = round(p)
        if abs(p - k) > GRID_RTOL * max(1.0, abs(p)):
            raise NonGridTime(f"{what} {t!r} is not on the grid")
        if k < 0 or k >= self.n_nodes:
            raise NonGridTime(f"{what} {t!r} is outside the window")
        return int(k)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, t: float) -> np.ndarray:
        """x(t) under the kind's interpolation with constant extrapolation."""
        p = self._position(t)
        if p <= 0.0:
            return self.values[0]
        if p >= self.n_nodes - 1:
            return self.values[-1]
        k = round(p)
        if abs(p - k) <= GRID_RTOL * max(1.0, abs(p)):
            return self.values[int(k)]
        i = int(np.floor(p))
        if self.kind is PathKind.Cadlag:
            return self.values[i]
        frac = p - i
        return (1.0 - frac) * self.values[i] + frac * self.values[i + 1]

    def left_limit(self, t: float) -> np.ndarray:
        """x(t-): equals evaluate for continuous paths; previous node at cadlag jumps."""
        if self.kind is PathKind.Continuous:
            return self.evaluate(t)
        p = self._position(t)
        if p <= 0.0:
            return self.values[0]
        if p > self.n_nodes - 1:
            return self.values[-1]
        k = round(p)
        if abs(p - k) <= GRID_RTOL * max(1.0, abs(p)):
            return self.values[max(int(k) - 1, 0)]
        return self.values[int(np.floor(p))]

    # -- structural maps ----------------------------------------------------

    def shift(self, t: float) -> "SampledPath":
        """The path s -> x(t+s); window moves to [t_min - t, t_max - t]."""
        try:
            k = _snap_units(t, self.dt, "shift")
        except NonGridTime as e:
            raise NonGridShift(str(e)) from None
        return SampledPath(self.kind, self.t_min - k * self.dt, self.dt, self.values)

    def _zero_index(self) -> int:
        if self.t_min > GRID_RTOL * self.dt or self.t_max < -GRID_RTOL * self.dt:
            raise WindowExcludesZero(f"window [{self.t_min}, {self.t_max}] excludes 0")
        return self.node_index(0.0, "origin")

    def stop(self) -> "SampledPath":
        """Freeze at x(0) (continuous) or x(0-) (cadlag); continuous at 0."""
        i0 = self._zero_index()
        if self.kind is PathKind.Cadlag:
            frozen = self.values[max(i0 - 1, 0)]
        else:
            frozen = self.values[i0]
        v = np.array(self.values)
        v[i0:] = frozen
        return SampledPath(self.kind, self.t_min, self.dt, v)

    def is_stopped(self) -> bool:
        try:
            return paths_equal(self, self.stop())
        except WindowExcludesZero:
            return False

    def stop_at(self, t: float) -> "SampledPath":
        """Conjugated stopping: shift(stop(shift(x, t)), -t)."""
        return self.shift(t).stop().shift(-t)

    def past_segment(self, t: float, h: float) -> "PastSegment":
        """The history s -> x(t+s) for s in [-h, 0], sampled on the grid."""
        if not h > 0:
            raise ValueError("delay horizon h must be positive")
        m = _snap_units(h, self.dt, "horizon")
        _snap_units(t, self.dt, "time")  # alignment check only
        vals = np.stack([self.evaluate(t - h + j * self.dt) for j in range(m + 1)])
        return PastSegment(h=m * self.dt, dt=self.dt, values=vals)

    # -- convenience --------------------------------------------------------

    def with_values(self, values: np.ndarray) -> "SampledPath":
        return SampledPath(self.kind, self.t_min, self.dt, values)

    def restrict(self, a: float, b: float) -> "SampledPath":
        """Restriction to the grid nodes of [a, b] (a, b grid-aligned, inside)."""
        ia, ib = self.node_index(a), self.node_index(b)
        return SampledPath(self.kind, self.t_min + ia * self.dt, self.dt,
                           self.values[ia:ib + 1])

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "t_min": self.t_min,
            "t_max": self.t_max,
            "dt": self.dt,
            "dim": self.dim,
            "values": self.values.tolist(),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SampledPath":
        return SampledPath(PathKind(d["kind"]), float(d["t_min"]), float(d["dt"]),
                           np.asarray(d["values"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(s: str) -> "SampledPath":
        return SampledPath.from_json_dict(json.loads(s))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time," + ",".join(f"coord_{j}" for j in range(self.dim)) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(("%.17g," % t) + ",".join("%.17g" % v for v in row) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class PastSegment:
    """An element of C([-h, 0]; R^d): the past of a path, last node at time 0."""

    h: float
    dt: float
    values: np.ndarray  # shape (m, d)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("segment needs at least 2 nodes")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def at(self, s: float) -> np.ndarray:
        """Linear interpolation at s in [-h, 0]; clamped outside."""
        p = (s + self.h) / self.dt
        if p <= 0:
            return self.values[0]
        if p >= self.n_nodes - 1:
            return self.values[-1]
        i = int(np.floor(p))
        frac = p - i
        if frac <= GRID_RTOL:
            return self.values[i]
        return (1.0 - frac) * self.values[i] + frac * self.values[i + 1]

    @property
    def value_at_zero(self) -> np.ndarray:
        return self.values[-1]


def concat(past: SampledPath, future: SampledPath) -> SampledPath:
    """Glue a stopped past to a future defined on [0, T], continuously at 0.

    The future is translated by ``past(0) - future(0)`` so the result is
    continuous at 0 regardless of where the future starts.
    """
    if abs(past.dt - future.dt) > GRID_RTOL * past.dt:
        raise NonGridTime("past and future must share the grid step")
    if past.kind is not future.kind:
        raise KindMismatch("past and future must share the path kind")
    if not past.is_stopped():
        raise PastNotStopped("concat requires past == stop(past)")
    if abs(future.t_min) > GRID_RTOL * future.dt:
        raise NonGridTime("future must be defined on [0, T]")
    i0 = past.node_index(0.0)
    offset = past.values[i0] - future.values[0]
    v = np.concatenate([past.values[:i0 + 1], future.values[1:] + offset])
    return SampledPath(past.kind, past.t_min, past.dt, v)


def paths_equal(a: SampledPath, b: SampledPath, atol: float = 0.0) -> bool:
    """Node-for-node equality (exact by default) with matching windows."""
    if a.kind is not b.kind or a.n_nodes != b.n_nodes:
        return False
    tol = GRID_RTOL * a.dt
    if abs(a.dt - b.dt) > tol or abs(a.t_min - b.t_min) > max(tol, GRID_RTOL * abs(a.t_min)):
        return False
    if atol == 0.0:
        return bool(np.array_equal(a.values, b.values))
    return bool(np.allclose(a.values, b.values, rtol=0.0, atol=atol))


# -- path factories ----------------------------------------------------------

def from_function(fn: Callable[[float], np.ndarray | float], kind: PathKind,
                  t_min: float, t_max: float, dt: float) -> SampledPath:
    n = _snap_units(t_max - t_min, dt, "window length") + 1
    rows = []
    for i in range(n):
        x = np.atleast_1d(np.asarray(fn(t_min + i * dt), dtype=float))
        rows.append(x)
    return SampledPath(kind, t_min, dt, np.stack(rows))


def constant_path(value, kind: PathKind, t_min: float, t_max: float, dt: float) -> SampledPath:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    n = _snap_units(t_max - t_min, dt, "window length") + 1
    return SampledPath(kind, t_min, dt, np.tile(v, (n, 1)))


def linear_path(slope, intercept, kind: PathKind, t_min: float, t_max: float,
                dt: float) -> SampledPath:
    s = np.atleast_1d(np.asarray(slope, dtype=float))
    c = np.atleast_1d(np.asarray(intercept, dtype=float))
    return from_function(lambda t: s * t + c, kind, t_min, t_max, dt)


def step_path(jump_times: Sequence[float], levels: Sequence, t_min: float,
              t_max: float, dt: float) -> SampledPath:
    """Cadlag piecewise-constant path: levels[k] on [jump_times[k-1], jump_times[k]).

    ``levels`` has one more entry than ``jump_times``; jumps snap to the grid.
    """
    lv = [np.atleast_1d(np.asarray(x, dtype=float)) for x in levels]
    if len(lv) != len(jump_times) + 1:
        raise ValueError("need len(levels) == len(jump_times) + 1")
    n = _snap_units(t_max - t_min, dt, "window length") + 1
    ts = sorted(jump_times)
    v = np.empty((n, lv[0].shape[0]))
    for i in range(n):
        t = t_min + i * dt
        k = 0
        for r in ts:
            if t >= r - GRID_RTOL * dt:
                k += 1
        v[i] = lv[k]
    return SampledPath(PathKind.Cadlag, t_min, dt, v)
