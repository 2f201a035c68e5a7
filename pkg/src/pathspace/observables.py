"""Bounded functionals on path space: running integrals, point evaluations,
left-limit evaluations, and the algebra they generate.

Each observable carries a *window*: a time interval such that the value depends
only on the path restricted to it (plus the bracketing grid nodes).  Windows
drive the measurability classification ``depends_only_on`` ("determined before
t") and the projection/locality fast paths in the expectation engine.

The derivation ``d0_derivative`` acts on the subalgebra generated by running
integrals and returns the product-rule image built from left-limit nodes; its
defining identity  shift(F, t) - F = integral of shift(dF, s) ds  is checked
numerically by ``check_cocycle``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import NonGridTime, NotInD0Domain
from .paths import GRID_RTOL, PathKind, SampledPath

# ---------------------------------------------------------------------------
# test functions on the state space
# ---------------------------------------------------------------------------


class TestFunction:
    """Bounded function f: R^d -> R, vectorized over leading axes."""

    bound: float = math.inf

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no gradient")


@dataclass(frozen=True)
class Coordinate(TestFunction):
    """Clamped coordinate x_i, clipped to [-clamp, clamp] to stay bounded."""

    index: int = 0
    clamp: float = 1e6

    @property
    def bound(self) -> float:
        return self.clamp

    def __call__(self, x):
        return np.clip(np.asarray(x)[..., self.index], -self.clamp, self.clamp)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        inside = np.abs(x[..., self.index]) < self.clamp
        g[..., self.index] = np.where(inside, 1.0, 0.0)
        return g


@dataclass(frozen=True)
class Cosine(TestFunction):
    """cos(<freq, x>)."""

    freq: Tuple[float, ...] = (1.0,)
    bound: float = 1.0

    def __call__(self, x):
        w = np.asarray(self.freq, dtype=float)
        return np.cos(np.asarray(x) @ w)

    def gradient(self, x):
        w = np.asarray(self.freq, dtype=float)
        phase = np.asarray(x) @ w
        return -np.sin(phase)[..., None] * w


@dataclass(frozen=True)
class GaussianBump(TestFunction):
    """exp(-|x - center|^2 / (2 width^2))."""

    center: Tuple[float, ...] = (0.0,)
    width: float = 1.0
    bound: float = 1.0

    def __call__(self, x):
        c = np.asarray(self.center, dtype=float)
        r2 = np.sum((np.asarray(x) - c) ** 2, axis=-1)
        return np.exp(-r2 / (2.0 * self.width ** 2))

    def gradient(self, x):
        c = np.asarray(self.center, dtype=float)
        val = self(x)
        return -(np.asarray(x) - c) / self.width ** 2 * val[..., None]


@dataclass(frozen=True)
class BoundedPolynomial(TestFunction):
    """clip(sum_k coeffs[k] * x_axis^k, -clamp, clamp)."""

    coeffs: Tuple[float, ...] = (0.0, 1.0)
    clamp: float = 1.0
    axis: int = 0

    @property
    def bound(self) -> float:
        return self.clamp

    def _raw(self, u):
        out = np.zeros_like(u)
        for c in reversed(self.coeffs):
            out = out * u + c
        return out

    def __call__(self, x):
        u = np.asarray(x)[..., self.axis]
        return np.clip(self._raw(u), -self.clamp, self.clamp)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        u = x[..., self.axis]
        dcoef = [k * c for k, c in enumerate(self.coeffs)][1:]
        d = np.zeros_like(u)
        for c in reversed(dcoef):
            d = d * u + c
        inside = np.abs(self._raw(u)) < self.clamp
        g = np.zeros_like(x)
        g[..., self.axis] = np.where(inside, d, 0.0)
        return g


class UserFunction(TestFunction):
    """User-supplied pure function with a declared bound and optional gradient."""

    def __init__(self, fn: Callable, bound: float, grad: Optional[Callable] = None,
                 vectorized: bool = True):
        self.fn = fn
        self.bound = float(bound)
        self.grad = grad
        self.vectorized = vectorized

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.vectorized or x.ndim == 1:
            return np.asarray(self.fn(x))
        flat = x.reshape(-1, x.shape[-1])
        return np.array([self.fn(r) for r in flat]).reshape(x.shape[:-1])

    def gradient(self, x):
        if self.grad is None:
            raise NotImplementedError("no gradient declared")
        return np.asarray(self.grad(np.asarray(x, dtype=float)))


def validate_gradient(f: TestFunction, probes: np.ndarray, tol: float = 1e-4) -> float:
    """Max abs deviation between declared gradient and central differences."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    eps = 1e-6
    worst = 0.0
    for x in probes:
        g = np.asarray(f.gradient(x), dtype=float)
        for j in range(x.shape[0]):
            e = np.zeros_like(x)
            e[j] = eps
            fd = (float(f(x + e)) - float(f(x - e))) / (2 * eps)
            worst = max(worst, abs(fd - g[j]))
    if worst > tol:
        raise ValueError(f"gradient inconsistent with finite differences: {worst:.3g} > {tol}")
    return worst


# ---------------------------------------------------------------------------
# dependence windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Window:
    """Time interval [lo, hi] or [lo, hi) over-approximating dependence.

    ``lo_strict`` marks a window whose content approaches ``lo`` from below
    (left-limit nodes): containment then requires the ambient interval to start
    strictly before ``lo``.  The empty window (lo > hi) is the window of
    constants.
    """

    lo: float
    hi: float
    hi_open: bool = False
    lo_strict: bool = False

    @staticmethod
    def empty() -> "Window":
        return Window(math.inf, -math.inf, True)

    @staticmethod
    def whole_line() -> "Window":
        return Window(-math.inf, math.inf, False)

    @staticmethod
    def before(t: float) -> "Window":
        """The interval (-inf, t)."""
        return Window(-math.inf, t, True)

    @staticmethod
    def upto(t: float) -> "Window":
        """The interval (-inf, t]."""
        return Window(-math.inf, t, False)

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def subset_of(self, other: "Window") -> bool:
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        if self.lo_strict and self.lo == self.hi:
            # pure left-limit germ at hi: needs content strictly before hi only
            return other.lo < self.lo and self.hi <= other.hi
        lo_ok = other.lo < self.lo if self.lo_strict else other.lo <= self.lo
        hi_ok = self.hi < other.hi or (
            self.hi == other.hi and (self.hi_open or not other.hi_open)
        )
        return lo_ok and hi_ok

    def translate(self, t: float) -> "Window":
        if self.is_empty:
            return self
        return Window(self.lo + t, self.hi + t, self.hi_open, self.lo_strict)

    @staticmethod
    def hull(windows: Sequence["Window"]) -> "Window":
        ws = [w for w in windows if not w.is_empty]
        if not ws:
            return Window.empty()
        lo = min(w.lo for w in ws)
        hi = max(w.hi for w in ws)
        lo_strict = any(w.lo_strict for w in ws if w.lo == lo)
        hi_open = all(w.hi_open for w in ws if w.hi == hi)
        return Window(lo, hi, hi_open, lo_strict)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


class Observable:
    """Node of the functional-algebra expression tree."""

    def apply(self, x: SampledPath) -> float:
        raise NotImplementedError

    @property
    def window(self) -> Window:
        raise NotImplementedError

    @property
    def bound(self) -> float:
        raise NotImplementedError

    def shifted(self, t: float) -> "Observable":
        raise NotImplementedError

    # algebra sugar
    def __mul__(self, other):
        other = _as_observable(other)
        return Product((self, other))

    __rmul__ = __mul__

    def __add__(self, other):
        return Sum((self, _as_observable(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum((self, Scale(-1.0, _as_observable(other))))

    def __neg__(self):
        return Scale(-1.0, self)


def _as_observable(v) -> "Observable":
    if isinstance(v, Observable):
        return v
    return Const(float(v))


@dataclass(frozen=True)
class Const(Observable):
    value: float

    def apply(self, x):
        return self.value

    @property
    def window(self):
        return Window.empty()

    @property
    def bound(self):
        return abs(self.value)

    def shifted(self, t):
        return self


@dataclass(frozen=True)
class IntegralNode(Observable):
    """F_a^b(f): the integral of f(x(s)) over [a, b]."""

    f: TestFunction
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("IntegralNode needs a < b")

    def apply(self, x: SampledPath) -> float:
        return _integrate(self.f, x, self.a, self.b)

    @property
    def window(self):
        return Window(self.a, self.b, hi_open=True)

    @property
    def bound(self):
        return (self.b - self.a) * self.f.bound

    def shifted(self, t):
        return IntegralNode(self.f, self.a + t, self.b + t)


@dataclass(frozen=True)
class EvalNode(Observable):
    """F_t(f) = f(x(t))."""

    f: TestFunction
    t: float

    def apply(self, x: SampledPath) -> float:
        return float(self.f(x.evaluate(self.t)))

    @property
    def window(self):
        return Window(self.t, self.t, hi_open=False)

    @property
    def bound(self):
        return self.f.bound

    def shifted(self, t):
        return EvalNode(self.f, self.t + t)


@dataclass(frozen=True)
class LeftLimNode(Observable):
    """F_t*(f) = f(x(t-)); determined strictly before t."""

    f: TestFunction
    t: float

    def apply(self, x: SampledPath) -> float:
        return float(self.f(x.left_limit(self.t)))

    @property
    def window(self):
        return Window(self.t, self.t, hi_open=True, lo_strict=True)

    @property
    def bound(self):
        return self.f.bound

    def shifted(self, t):
        return LeftLimNode(self.f, self.t + t)


@dataclass(frozen=True)
class Product(Observable):
    children: Tuple[Observable, ...]

    def apply(self, x):
        out = 1.0
        for c in self.children:
            out *= c.apply(x)
        return out

    @property
    def window(self):
        return Window.hull([c.window for c in self.children])

    @property
    def bound(self):
        out = 1.0
        for c in self.children:
            out *= c.bound
        return out

    def shifted(self, t):
        return Product(tuple(c.shifted(t) for c in self.children))


@dataclass(frozen=True)
class Sum(Observable):
    children: Tuple[Observable, ...]

    def apply(self, x):
        return sum(c.apply(x) for c in self.children)

    @property
    def window(self):
        return Window.hull([c.window for c in self.children])

    @property
    def bound(self):
        return sum(c.bound for c in self.children)

    def shifted(self, t):
        return Sum(tuple(c.shifted(t) for c in self.children))


@dataclass(frozen=True)
class Scale(Observable):
    factor: float
    child: Observable

    def apply(self, x):
        return self.factor * self.child.apply(x)

    @property
    def window(self):
        return self.child.window

    @property
    def bound(self):
        return abs(self.factor) * self.child.bound

    def shifted(self, t):
        return Scale(self.factor, self.child.shifted(t))


class UserObservable(Observable):
    """Opaque path functional; the window must be declared (whole line if not)."""

    def __init__(self, fn: Callable[[SampledPath], float], bound: float,
                 window: Optional[Window] = None):
        self.fn = fn
        self._bound = float(bound)
        self._window = window if window is not None else Window.whole_line()

    def apply(self, x):
        return float(self.fn(x))

    @property
    def window(self):
        return self._window

    @property
    def bound(self):
        return self._bound

    def shifted(self, t):
        fn = self.fn
        return UserObservable(lambda x: fn(x.shift(t)), self._bound,
                              self._window.translate(t))


def apply(F: Observable, x: SampledPath) -> float:
    return F.apply(x)


def shift_obs(F: Observable, t: float, dt: Optional[float] = None) -> Observable:
    """The pullback of the path shift: (shift_obs(F, t))(x) = F(shift(x, t)).

    When ``dt`` is given, ``t`` is checked against the grid; otherwise
    alignment is enforced downstream when paths are shifted.
    """
    if dt is not None:
        u = t / dt
        if abs(u - round(u)) > GRID_RTOL * max(1.0, abs(u)):
            from .errors import NonGridShift
            raise NonGridShift(f"shift {t!r} is not a multiple of dt={dt!r}")
    return F.shifted(t)


def depends_only_on(F: Observable, interval: Window) -> bool:
    return F.window.subset_of(interval)


# ---------------------------------------------------------------------------
# quadrature of f(x(s)) over [a, b]
# ---------------------------------------------------------------------------


def _integrate(f: TestFunction, x: SampledPath, a: float, b: float) -> float:
    """Exact for cadlag step paths; trapezoid on the grid for continuous paths."""
    # breakpoints: a, interior grid nodes, b
    i_lo = int(math.ceil((a - x.t_min) / x.dt - GRID_RTOL))
    i_hi = int(math.floor((b - x.t_min) / x.dt + GRID_RTOL))
    nodes = [x.t_min + i * x.dt for i in range(max(i_lo, 0), min(i_hi, x.n_nodes - 1) + 1)]
    pts = [a] + [t for t in nodes if a + GRID_RTOL * x.dt < t < b - GRID_RTOL * x.dt] + [b]
    states = np.stack([x.evaluate(t) for t in pts])
    if x.kind is PathKind.Cadlag:
        vals = np.asarray(f(states[:-1]), dtype=float)
        widths = np.diff(pts)
        return float(np.dot(vals, widths))
    vals = np.asarray(f(states), dtype=float)
    widths = np.diff(pts)
    return float(np.dot((vals[:-1] + vals[1:]) / 2.0, widths))


def left_limit_average(f: TestFunction, x: SampledPath, t: float, n: int) -> float:
    """Reference evaluator n * integral of f(x(s)) over [t-2/n, t-1/n].

    Converges to f(x(t-)) as n grows; kept as a slow cross-check for the
    left-limit node.
    """
    return n * _integrate(f, x, t - 2.0 / n, t - 1.0 / n)


# ---------------------------------------------------------------------------
# the derivation on the integral algebra
# ---------------------------------------------------------------------------


def d0_derivative(F: Observable) -> Observable:
    """Derivation on the algebra generated by integral nodes.

    Maps F_a^b(f) to F_b*(f) - F_a*(f) and extends by linearity and the
    product rule.  Trees containing evaluation, left-limit or opaque nodes are
    rejected.
    """
    if isinstance(F, Const):
        return Const(0.0)
    if isinstance(F, Scale):
        return Scale(F.factor, d0_derivative(F.child))
    if isinstance(F, Sum):
        return Sum(tuple(d0_derivative(c) for c in F.children))
    if isinstance(F, Product):
        terms = []
        for k in range(len(F.children)):
            factors = list(F.children)
            factors[k] = d0_derivative(factors[k])
            terms.append(Product(tuple(factors)))
        return Sum(tuple(terms))
    if isinstance(F, IntegralNode):
        return Sum((LeftLimNode(F.f, F.b), Scale(-1.0, LeftLimNode(F.f, F.a))))
    raise NotInD0Domain(f"{type(F).__name__} is outside the integral algebra")


def check_cocycle(F: Observable, x: SampledPath, t: float, quad_step: float) -> float:
    """Residual of  [shift(F,t) - F](x) = integral_0^t [shift(dF, s)](x) ds.

    The right side is a trapezoid rule over s with step ``quad_step``; the
    residual is O(quad_step) on smooth paths and 0 for constants.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    n = round(t / quad_step)
    if n < 1 or abs(t - n * quad_step) > GRID_RTOL * max(1.0, t):
        raise NonGridTime("t must be a multiple of quad_step")
    G = d0_derivative(F)
    lhs = apply(shift_obs(F, t), x) - apply(F, x)
    svals = [apply(shift_obs(G, k * quad_step), x) for k in range(n + 1)]
    rhs = quad_step * (sum(svals) - 0.5 * (svals[0] + svals[-1]))
    return abs(lhs - rhs)
