import math

import numpy as np
import pytest

from pathspace import (Const, Coordinate, Cosine, DelayEvolutionMap, DelayKind,
                       DeterministicKind, DiscreteDelayDrift, EvalNode,
                       ExpectationSpec, F_0star, FixedJump, GaussianBump,
                       HistoryDiffusion, HistoryDrift, HorizonExceeded,
                       IntegralNode, LevyFlowKind, LevySpec, MarkovKind,
                       MCConfig, NotPastDetermined, PathKind,
                       PathsDisagreeAtZero, PointwiseDrift, SampledPath,
                       apply, check_expectation_axioms,
                       check_finite_delay_invariance, check_homogeneity,
                       check_markov_reduction, check_multiplicativity,
                       check_semigroup_law, conditional_expectation,
                       constant_diffusion, constant_path, ensemble_values,
                       expectation, from_function, generator_probe,
                       induced_state_semigroup, richardson_extrapolate,
                       semigroup_apply, shift_obs, simplex_generator_check)

from oracles import gauss_expectation, heat_cos

COS = Cosine((1.0,))
ZERO = PointwiseDrift(lambda y: np.zeros_like(y))
UNIT_SIGMA = constant_diffusion([[1.0]])


def brownian_spec(n=2000, dt=0.01, horizon=1.5, seed=7):
    return ExpectationSpec(MarkovKind(ZERO, UNIT_SIGMA),
                           MCConfig(n, seed, dt, horizon))


def dde_spec(dt=0.01, horizon=3.0, seed=1):
    b = DiscreteDelayDrift(lambda y: 0.5 * np.tanh(y), delay=1.0)
    return ExpectationSpec(DeterministicKind(DelayEvolutionMap(b)),
                           MCConfig(1, seed, dt, horizon))


def sdde_spec(n=2000, dt=0.01, horizon=2.5, seed=5):
    b = HistoryDrift(lambda seg: seg.at(-1.0), h=1.0)
    sg = HistoryDiffusion.from_pointwise(UNIT_SIGMA, 1.0)
    return ExpectationSpec(DelayKind(b, sg), MCConfig(n, seed, dt, horizon))


def base_path(dt=0.01, t_min=-2.0):
    return from_function(lambda t: np.array([math.sin(t)]),
                         PathKind.Continuous, t_min, 0.0, dt)


def test_projection_exact():
    spec = brownian_spec()
    x = base_path()
    F = IntegralNode(COS, -1.0, 0.0)
    est = expectation(spec, F, x)
    assert est.mean == apply(F, x)
    assert est.stderr == 0.0 and est.n == 0


def test_deterministic_expectation_is_composition():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    F = EvalNode(COS, 1.0)
    est = expectation(spec, F, x)
    assert est.mean == apply(F, spec.kind.phi(x))
    assert est.stderr == 0.0


def test_expectation_heat_sanity():
    spec = brownian_spec(n=20000, dt=0.01)
    x = base_path()
    est = expectation(spec, EvalNode(COS, 1.0), x)
    target = heat_cos(1.0, x.evaluate(0.0)[0])
    assert abs(est.mean - target) <= 4 * est.stderr + 2 * spec.mc.dt


def test_conditional_expectation():
    spec = brownian_spec(n=500)
    x = base_path()
    G = EvalNode(COS, 1.0)
    a = conditional_expectation(spec, G, x, 0.0)
    b = expectation(spec, G, x)
    assert a.mean == b.mean
    # determined before t: exact projection through the conjugation
    F = IntegralNode(COS, -1.0, 0.5)
    est = conditional_expectation(spec, F, x, 1.0)
    assert est.mean == pytest.approx(apply(F, x), abs=1e-12)
    assert est.stderr == 0.0


def test_conditional_expectation_deterministic_restart():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    t = 0.5
    F = EvalNode(COS, 1.0)
    est = conditional_expectation(spec, F, x, t)
    phi = spec.kind.phi
    restarted = phi(x.shift(t)).shift(-t)
    assert est.mean == pytest.approx(apply(F, restarted), abs=1e-12)


def test_semigroup_apply_contracts():
    spec = brownian_spec(n=200)
    x = base_path()
    F = F_0star(COS)
    assert semigroup_apply(spec, 0.0, F, x).mean == apply(F, x)
    with pytest.raises(NotPastDetermined):
        semigroup_apply(spec, 0.5, EvalNode(COS, 0.0), x)
    with pytest.raises(HorizonExceeded):
        semigroup_apply(spec, 10.0, F, x)
    # observables determined before -t0 are just shifted for s <= t0
    G = IntegralNode(COS, -1.5, -0.5)
    for s in (0.1, 0.5):
        est = semigroup_apply(spec, s, G, x)
        assert est.mean == apply(shift_obs(G, s), x)
        assert est.stderr == 0.0


def test_axioms_all_kinds():
    x = base_path()
    F_past = IntegralNode(COS, -1.0, 0.0)
    G = EvalNode(COS, 1.0)
    for spec in (brownian_spec(n=300), sdde_spec(n=200),
                 ExpectationSpec(LevyFlowKind(
                     LevySpec((0.2,), ((0.3,),), 0.5, FixedJump((0.4,))),
                     DiscreteDelayDrift(lambda y: 0.3 * np.tanh(y), delay=1.0)),
                     MCConfig(150, 3, 0.01, 1.5))):
        xk = x
        if isinstance(spec.kind, LevyFlowKind):
            xk = SampledPath(PathKind.Cadlag, x.t_min, x.dt, x.values)
        reports = check_expectation_axioms(spec, [(F_past, G)], [xk])
        for rep in reports:
            assert rep.passed, (rep.name, rep.statistic)
            assert rep.statistic == 0.0


def test_axioms_deterministic():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    reports = check_expectation_axioms(
        spec, [(IntegralNode(COS, -1.0, 0.0), EvalNode(COS, 1.0))], [x])
    assert all(r.statistic == 0.0 for r in reports)


def test_homogeneity_deterministic_exact():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    rep = check_homogeneity(spec, EvalNode(COS, 1.0), x, 0.5)
    assert rep.statistic <= 1e-12


def test_homogeneity_brownian_z():
    spec = brownian_spec(n=100, dt=0.02, horizon=1.2, seed=11)
    x = base_path(dt=0.02)
    rep = check_homogeneity(spec, EvalNode(COS, 1.0), x, 0.5,
                            n_outer=80, n_inner=120)
    assert rep.kind == "z"
    assert abs(rep.statistic) <= 4.0, rep.details


def test_semigroup_law_edges_and_brownian():
    spec = brownian_spec(n=100, dt=0.02, horizon=1.6, seed=13)
    x = base_path(dt=0.02)
    F = F_0star(COS)
    rep0 = check_semigroup_law(spec, F, x, s=0.5, t=0.0, n_outer=50, n_inner=50)
    assert rep0.statistic == 0.0
    rep1 = check_semigroup_law(spec, F, x, s=0.0, t=0.5, n_outer=50, n_inner=50)
    assert rep1.statistic == 0.0
    rep = check_semigroup_law(spec, F, x, s=0.5, t=0.5, n_outer=80, n_inner=120)
    assert abs(rep.statistic) <= 4.0, rep.details


def test_semigroup_law_deterministic_exact():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    rep = check_semigroup_law(spec, F_0star(COS), x, 0.5, 1.0)
    assert rep.statistic <= 1e-12


def test_markov_reduction_crn_zero():
    spec = brownian_spec(n=400)
    dt = spec.mc.dt
    x1 = constant_path(0.4, PathKind.Continuous, -2.0, 0.0, dt)
    x2 = from_function(lambda t: np.array([0.4 + t * (t + 1)]),
                       PathKind.Continuous, -2.0, 0.0, dt)
    rep = check_markov_reduction(spec, Coordinate(0, 5.0), 1.0, (x1, x2))
    assert rep.statistic == 0.0
    rep0 = check_markov_reduction(spec, Coordinate(0, 5.0), 0.0, (x1, x2))
    assert rep0.statistic == 0.0
    with pytest.raises(PathsDisagreeAtZero):
        check_markov_reduction(spec, COS, 1.0,
                               (x1, constant_path(1.0, PathKind.Continuous,
                                                  -2.0, 0.0, dt)))


def test_markov_reduction_delay_detects_history():
    spec = sdde_spec(n=400, dt=0.01, horizon=2.0)
    dt = spec.mc.dt
    x1 = constant_path(0.0, PathKind.Continuous, -2.0, 0.0, dt)
    # ramp history matched at 0
    x2 = from_function(lambda t: np.array([min(1.0, -5.0 * t)]),
                       PathKind.Continuous, -2.0, 0.0, dt)
    rep = check_markov_reduction(spec, Coordinate(0, 5.0), 1.5, (x1, x2),
                                 tol=math.inf)
    assert abs(rep.details["difference"]) > 0.1
    assert abs(rep.details["difference"]) > 4 * rep.details["stderr"]


def test_induced_state_semigroup():
    spec = brownian_spec(n=4000, dt=0.01)
    f = COS
    est0 = induced_state_semigroup(spec, f, 0.0, [0.7])
    assert est0.mean == pytest.approx(math.cos(0.7))
    est = induced_state_semigroup(spec, f, 1.0, [0.0])
    assert abs(est.mean - math.exp(-0.5)) <= 4 * est.stderr + 2 * spec.mc.dt


def test_induced_state_semigroup_ou():
    # b = -y, sigma = sqrt(2): T(t) f(x0) = E f(x0 e^-t + sqrt(1-e^-2t) Z)
    drift = PointwiseDrift(lambda y: -y)
    sig = constant_diffusion([[math.sqrt(2.0)]])
    spec = ExpectationSpec(MarkovKind(drift, sig), MCConfig(4000, 17, 0.005, 1.5))
    f = Coordinate(0, 2.0)
    t, x0 = 0.5, 1.0
    est = induced_state_semigroup(spec, f, t, [x0])
    target = gauss_expectation(f, x0 * math.exp(-t), math.sqrt(1 - math.exp(-2 * t)))
    assert abs(est.mean - target) <= 4 * est.stderr + 2 * spec.mc.dt


def test_generator_probe_const_and_dde():
    spec = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    rows = generator_probe(spec, Const(2.0), x, [0.1, 0.05])
    assert all(r["quotient"] == 0.0 for r in rows)
    f = GaussianBump((0.0,), 1.0)
    rows = generator_probe(spec, F_0star(f), x, [0.08, 0.04, 0.02])
    got = richardson_extrapolate(rows)
    b_of_history = 0.5 * math.tanh(math.cos(-1.0))
    target = float(f.gradient(x.evaluate(0.0))[0]) * b_of_history
    assert got == pytest.approx(target, abs=1e-2)


def test_generator_probe_markov_lift():
    spec = brownian_spec(n=20000, dt=0.005, horizon=0.5, seed=23)
    x = base_path(dt=0.005)
    rows = generator_probe(spec, F_0star(COS), x, [0.1])
    target = -0.5 * math.cos(x.evaluate(0.0)[0])  # generator of cos under heat
    r = rows[0]
    assert abs(r["quotient"] - target) <= 4 * r["stderr"] + r["t"]


def test_simplex_generator_check():
    spec = brownian_spec(n=4000, dt=0.005, horizon=1.5, seed=29)
    x = constant_path(0.0, PathKind.Continuous, -0.1, 0.0, 0.005)
    rep = simplex_generator_check(spec, [COS], 0.0, 1.0, x, dt_fd=0.05)
    assert rep.passed  # |mean diff| within 4 stderr + dt_fd
    image_target = math.exp(-0.5) - 1.0
    assert abs(rep.details["image_mean"] - image_target) <= \
        4 * rep.details["image_stderr"] + 0.05
    # n=2 with constants: u = (b-a)^2/2 exactly, image identically 0
    one = Coordinate(0, 1.0)  # clamp 1 makes f == 1 on constant-1 paths

    class One:
        bound = 1.0

        def __call__(self, x):
            return np.ones(np.asarray(x).shape[:-1])

    rep2 = simplex_generator_check(spec, [One(), One()], 0.0, 1.0, x, dt_fd=0.05)
    assert rep2.statistic == 0.0
    assert rep2.details["image_mean"] == 0.0


def test_finite_delay_invariance():
    spec = sdde_spec(n=300)
    dt = spec.mc.dt
    h = spec.kind.h

    def past(tail):
        def fn(t):
            if t >= -h:
                return np.array([math.sin(t)])
            return np.array([tail])
        return from_function(fn, PathKind.Continuous, -3.0, 0.0, dt)

    F = IntegralNode(COS, -h, -0.25)
    rep = check_finite_delay_invariance(spec, F, 1.0, (past(0.0), past(5.0)))
    assert rep.statistic == 0.0
    with pytest.raises(NotPastDetermined):
        check_finite_delay_invariance(spec, IntegralNode(COS, -2 * h, 0.0),
                                      1.0, (past(0.0), past(5.0)))
    spec_d = dde_spec()
    rep = check_finite_delay_invariance(
        spec_d, IntegralNode(COS, -1.0, -0.25), 1.0, (past(0.0), past(5.0)))
    assert rep.statistic == 0.0


def test_multiplicativity():
    spec_d = dde_spec()
    x = from_function(lambda t: np.array([math.cos(t)]), PathKind.Continuous,
                      -2.0, 3.0, 0.01)
    F = EvalNode(COS, 1.0)
    rep = check_multiplicativity(spec_d, F, F, x)
    assert rep.statistic == 0.0
    spec = brownian_spec(n=5000)
    xb = base_path()
    clamp = Coordinate(0, 2.0)
    F1 = EvalNode(clamp, 1.0)
    rep = check_multiplicativity(spec, F1, F1, xb)
    assert abs(rep.statistic) >= 4.0  # genuine variance detected
    assert rep.details["covariance"] > 0
    # past-determined first factor reduces to locality: exactly zero
    rep = check_multiplicativity(spec, IntegralNode(COS, -1.0, 0.0),
                                 EvalNode(COS, 1.0), xb)
    assert abs(rep.details["covariance"]) <= 1e-12


def test_semigroup_handle():
    from pathspace import Semigroup
    spec = brownian_spec(n=200)
    T = Semigroup(spec)
    x = base_path()
    F = F_0star(COS)
    assert T(0.0, F, x).mean == apply(F, x)  # projection at t=0
    assert T(0.5, F, x).mean == semigroup_apply(spec, 0.5, F, x).mean
    assert T.expectation(F, x).mean == apply(F, x)
    assert T.conditional(F, x, 0.0).mean == apply(F, x)
    rows = T.generator_probe(Const(1.0), x, [0.1])
    assert rows[0]["quotient"] == 0.0


def test_sampled_futures_start_at_the_present():
    # the empirical law of y(0) under each kernel is the point mass at the
    # present value (left limit for the cadlag flow)
    from pathspace.semigroup import glued_futures
    dt = 0.01
    x = base_path(dt=dt)
    for spec in (brownian_spec(n=50, dt=dt), sdde_spec(n=50, dt=dt)):
        for g in glued_futures(spec, x, 20):
            assert np.array_equal(g.evaluate(0.0), x.evaluate(0.0))
    xc = SampledPath(PathKind.Cadlag, x.t_min, dt, x.values)
    levy = ExpectationSpec(
        LevyFlowKind(LevySpec((0.2,), ((0.3,),), 0.5, FixedJump((0.4,))),
                     DiscreteDelayDrift(lambda y: 0.3 * np.tanh(y), delay=1.0)),
        MCConfig(20, 3, dt, 1.5))
    for g in glued_futures(levy, xc, 20):
        assert np.array_equal(g.evaluate(0.0), xc.left_limit(0.0))


def test_ensemble_values_crn_stability():
    spec = brownian_spec(n=200)
    x = base_path()
    F = EvalNode(COS, 1.0)
    a = ensemble_values(spec, [F], x)
    b = ensemble_values(spec, [F], x)
    assert np.array_equal(a, b)
    c = ensemble_values(spec, [F], x, substream=1)
    assert not np.array_equal(a, c)
