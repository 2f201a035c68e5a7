import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pathspace import (BoundedPolynomial, Const, Coordinate, Cosine, EvalNode,
                       GaussianBump, IntegralNode, LeftLimNode, NotInD0Domain,
                       Product, Scale, Sum, UserFunction, Window, apply,
                       check_cocycle, d0_derivative, depends_only_on,
                       left_limit_average, shift_obs, step_path,
                       validate_gradient)

from conftest import make_linear, make_smooth, make_step

ID = Coordinate(0, clamp=100.0)
COS = Cosine((1.0,))


def test_apply_examples():
    x = make_linear(dt=0.0625)
    assert apply(IntegralNode(ID, 0.0, 1.0), x) == pytest.approx(0.5)
    z = make_linear(dt=0.0625)
    assert apply(EvalNode(COS, 0.0), z) == pytest.approx(1.0)
    s = step_path([0.0], [[0.0], [1.0]], -2, 2, 0.0625)
    assert apply(LeftLimNode(ID, 0.0), s) == 0.0
    assert apply(EvalNode(ID, 0.0), s) == 1.0


def test_integral_exact_for_step_paths():
    s = step_path([0.0, 1.0], [[1.0], [3.0], [0.5]], -2, 2, 0.25)
    got = apply(IntegralNode(ID, -1.0, 2.0), s)
    assert got == pytest.approx(1.0 * 1.0 + 3.0 * 1.0 + 0.5 * 1.0)
    # off-grid limits use partial cells
    got = apply(IntegralNode(ID, -0.1, 0.1), s)
    assert got == pytest.approx(0.1 * 1.0 + 0.1 * 3.0)


def test_shift_obs_structure_and_action(rng):
    F = IntegralNode(COS, -1.0, 0.5)
    G = shift_obs(F, 0.25)
    assert isinstance(G, IntegralNode)
    assert (G.a, G.b) == (-0.75, 0.75)
    assert shift_obs(F, 0.0) == F
    for _ in range(10):
        x = make_smooth(rng)
        t = float(rng.integers(-8, 8)) * x.dt
        H = Product((IntegralNode(COS, -0.5, 0.5), EvalNode(ID, 0.25)))
        assert apply(shift_obs(H, t), x) == pytest.approx(
            apply(H, x.shift(t)), abs=1e-12)


def test_window_translation():
    F = IntegralNode(COS, -1.0, 0.0)
    assert shift_obs(F, 2.0).window.subset_of(Window(1.0, 2.0, hi_open=True))


def test_d0_structure():
    F = IntegralNode(COS, -1.0, 0.0)
    dF = d0_derivative(F)
    assert isinstance(dF, Sum)
    up, down = dF.children
    assert isinstance(up, LeftLimNode) and up.t == 0.0
    assert isinstance(down, Scale) and down.factor == -1.0
    assert d0_derivative(Const(3.0)) == Const(0.0)
    with pytest.raises(NotInD0Domain):
        d0_derivative(EvalNode(COS, 0.0))
    with pytest.raises(NotInD0Domain):
        d0_derivative(Product((F, EvalNode(COS, 0.0))))


def test_d0_product_rule_numeric(rng):
    F = IntegralNode(COS, -1.0, 0.0)
    G = IntegralNode(GaussianBump((0.0,), 1.0), 0.0, 1.0)
    FG = Product((F, G))
    lhs = d0_derivative(FG)
    rhs = Sum((Product((d0_derivative(F), G)), Product((F, d0_derivative(G)))))
    for _ in range(20):
        x = make_step(rng) if rng.integers(2) else make_smooth(rng)
        assert apply(lhs, x) == pytest.approx(apply(rhs, x), abs=1e-12)


def test_cocycle_closed_form():
    # F = integral of the coordinate over [0,1] on x(t)=t: both sides in
    # closed form; the trapezoid rules on both sides coincide exactly
    x = make_linear(t_min=-2, t_max=3, dt=0.0625)
    F = IntegralNode(ID, 0.0, 1.0)
    res = check_cocycle(F, x, t=0.5, quad_step=0.0625)
    assert res <= 1e-12
    assert check_cocycle(Const(2.0), x, 0.5, 0.0625) == 0.0


def test_cocycle_product(rng):
    x = make_smooth(rng, t_min=-3, t_max=3, dt=0.01)
    F = Product((IntegralNode(COS, 0.0, 1.0),
                 IntegralNode(GaussianBump((0.0,), 1.0), -1.0, 0.0)))
    res = check_cocycle(F, x, t=0.25, quad_step=0.01)
    assert res <= 5e-3  # O(quad_step + dt)
    # once the quadrature is fine the grid (dt) floor dominates; both are tiny
    assert check_cocycle(F, x, t=0.25, quad_step=0.0025) <= 5e-3


def test_depends_only_on():
    before0 = Window.before(0.0)
    assert depends_only_on(IntegralNode(COS, -2.0, -1.0), before0)
    assert not depends_only_on(EvalNode(COS, 1.0), before0)
    assert depends_only_on(LeftLimNode(COS, 0.0), before0)
    assert not depends_only_on(EvalNode(COS, 0.0), before0)
    assert depends_only_on(EvalNode(COS, 0.0), Window.upto(0.0))
    assert depends_only_on(IntegralNode(COS, -1.0, 0.0), before0)
    assert depends_only_on(Const(1.0), before0)
    # composite windows
    FG = Product((LeftLimNode(COS, 0.0), IntegralNode(COS, -1.0, 0.0)))
    assert depends_only_on(FG, before0)
    assert not depends_only_on(LeftLimNode(COS, 0.0), Window.before(-1.0))


def _random_tree(rng, depth=2):
    if depth == 0 or rng.random() < 0.4:
        f = [COS, GaussianBump((0.3,), 0.7), BoundedPolynomial((0.1, 0.5), 2.0)][rng.integers(3)]
        k = rng.integers(3)
        a = float(rng.integers(-12, 6)) * 0.125
        if k == 0:
            return IntegralNode(f, a, a + float(rng.integers(1, 8)) * 0.125)
        if k == 1:
            return EvalNode(f, a)
        return LeftLimNode(f, a)
    ctor = [Product, Sum][rng.integers(2)]
    return ctor(tuple(_random_tree(rng, depth - 1) for _ in range(2)))


def test_window_soundness_fuzz(rng):
    for _ in range(40):
        F = _random_tree(rng)
        x = make_step(rng) if rng.integers(2) else make_smooth(rng, dt=0.125)
        w = F.window
        if w.is_empty:
            continue
        v = np.array(x.values)
        outside = (x.times < w.lo - 1.5 * x.dt) | (x.times > w.hi + 1.5 * x.dt)
        if not outside.any():
            continue
        v[outside] += rng.uniform(0.5, 2.0)
        y = x.with_values(v)
        assert apply(F, y) == apply(F, x)


def test_stop_invariance_of_past_observables(rng):
    for _ in range(25):
        F = Product((IntegralNode(COS, -1.5, -0.5), LeftLimNode(COS, 0.0)))
        x = make_step(rng) if rng.integers(2) else make_smooth(rng, dt=0.125)
        assert apply(F, x.stop()) == apply(F, x)


def test_boundedness(rng):
    for _ in range(30):
        F = _random_tree(rng)
        x = make_step(rng) if rng.integers(2) else make_smooth(rng, dt=0.125)
        assert abs(apply(F, x)) <= F.bound + 1e-9


def test_left_limit_average_reference(rng):
    s = step_path([0.0], [[0.2], [0.9]], -2, 2, 0.0625)
    target = apply(LeftLimNode(ID, 0.0), s)
    approx = [left_limit_average(ID, s, 0.0, n) for n in (64, 256, 1024)]
    assert approx[-1] == pytest.approx(target, abs=1e-12)
    x = make_smooth(rng, dt=0.01)
    tgt = apply(LeftLimNode(COS, 0.5), x)
    vals = [left_limit_average(COS, x, 0.5, n) for n in (16, 64, 256)]
    errs = [abs(v - tgt) for v in vals]
    assert errs[-1] < errs[0] and errs[-1] < 5e-3


def test_validate_gradient():
    probes = np.linspace(-2, 2, 9).reshape(-1, 1)
    for f in (COS, GaussianBump((0.3,), 0.8), BoundedPolynomial((0.0, 1.0, 0.2), 5.0),
              Coordinate(0, 3.0)):
        validate_gradient(f, probes)
    bad = UserFunction(lambda x: float(np.sin(x[0])), 1.0,
                       grad=lambda x: np.array([2.0]))
    with pytest.raises(ValueError):
        validate_gradient(bad, probes)


def test_user_observable_window_contract(rng):
    from pathspace import UserObservable

    def running_max(x):
        return float(np.max(x.values[x.times <= 0.0]))

    declared = UserObservable(running_max, bound=10.0,
                              window=Window(-np.inf, 0.0, hi_open=False))
    undeclared = UserObservable(running_max, bound=10.0)
    x = make_smooth(rng, dt=0.125)
    assert declared.apply(x) == running_max(x)
    assert depends_only_on(declared, Window.upto(0.0))
    # an undeclared window is the whole line: never past-determined
    assert not depends_only_on(undeclared, Window.upto(0.0))
    shifted = shift_obs(declared, 0.25)
    assert shifted.apply(x) == pytest.approx(declared.apply(x.shift(0.25)))
    with pytest.raises(NotInD0Domain):
        d0_derivative(declared)


def test_bound_composition():
    F = Sum((Scale(2.0, IntegralNode(COS, 0.0, 1.5)), Const(-1.0)))
    assert F.bound == pytest.approx(2.0 * 1.5 + 1.0)
    G = Product((EvalNode(COS, 0.0), EvalNode(COS, 1.0)))
    assert G.bound == 1.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(-8, 8))
def test_shift_action_property(seed, k):
    rng = np.random.default_rng(seed)
    x = make_step(rng) if seed % 2 else make_smooth(rng, dt=0.125)
    t = k * x.dt
    F = _random_tree(rng, depth=1)
    assert apply(shift_obs(F, t), x) == pytest.approx(apply(F, x.shift(t)),
                                                      rel=1e-12, abs=1e-12)
