import numpy as np
import pytest

from pathspace import PathKind, from_function, step_path


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_linear(slope=1.0, t_min=-2.0, t_max=2.0, dt=0.125):
    return from_function(lambda t: np.array([slope * t]), PathKind.Continuous,
                         t_min, t_max, dt)


def make_smooth(rng, t_min=-2.0, t_max=2.0, dt=0.0625, dim=1):
    a = rng.uniform(0.3, 1.0, dim)
    w = rng.uniform(0.5, 2.0)
    ph = rng.uniform(0, 6.28)
    return from_function(lambda t: a * np.sin(w * t + ph), PathKind.Continuous,
                         t_min, t_max, dt)


def make_step(rng, n_jumps=3, t_min=-3.0, t_max=3.0, dt=0.05, span=1.8,
              jump_lo=-1.0, jump_hi=1.0):
    ts = []
    while len(set(ts)) != n_jumps:
        ts = list(np.round(rng.uniform(-span, span, n_jumps) / dt) * dt)
    levels = [rng.uniform(-1.0, 1.0, 1)]
    for _ in range(n_jumps):
        levels.append(levels[-1] + rng.uniform(jump_lo, jump_hi, 1))
    return step_path(sorted(ts), levels, t_min, t_max, dt)
