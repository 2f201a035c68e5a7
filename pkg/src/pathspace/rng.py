"""Counter-based random streams, splittable by (seed, trajectory, substream).

Each logical stream is a Philox generator keyed by the tuple of ids, so
trajectory i always sees the same noise regardless of batch layout or thread
count.  This is what makes common-random-number comparisons across dynamics and
estimators exact rather than statistical.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_stream(seed: int, trajectory_id: int = 0, substream: int = 0) -> np.random.Generator:
    """A fresh generator for (seed, trajectory_id, substream)."""
    key = np.array([
        (int(seed) ^ 0x9E3779B97F4A7C15) & _MASK64,
        ((int(trajectory_id) & 0xFFFFFFFF) << 32 | (int(substream) & 0xFFFFFFFF)) & _MASK64,
    ], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def normal_increments(seed: int, trajectory_id: int, n_steps: int, m: int,
                      dt: float, substream: int = 0) -> np.ndarray:
    """N(0, dt I_m) increments, shape (n_steps, m), from the trajectory's stream."""
    g = make_stream(seed, trajectory_id, substream)
    return g.standard_normal((n_steps, m)) * np.sqrt(dt)
