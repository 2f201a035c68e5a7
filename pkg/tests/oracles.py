"""Independent oracles used by the test and acceptance suites.

These deliberately avoid the library's own search/enumeration code paths:
the J1 oracle optimizes time-change images over a dense grid, the state
expectations use Gauss-Hermite quadrature, and the delay means use the
method-of-steps closed forms.
"""

import math

import numpy as np

from pathspace.metrics import step_representation


def oracle_d_ab(x, y, a, b, res=1e-3):
    """Brute-force window J1 distance for step paths.

    Between consecutive jumps of x the path is constant, so the sup term of a
    time change depends only on the interval its images span; the
    piecewise-linear interpolation through the jump images minimizes the
    log-slope cost.  The infimum is therefore a minimum over the images of
    x's jumps, searched here on a dense grid by dynamic programming.
    """
    rx, vx = step_representation(x)
    ry, vy = step_representation(y)
    inx = [i for i, r in enumerate(rx) if a < r < b]
    p = len(inx)
    PD = np.minimum(np.linalg.norm(vx[:, None, :] - vy[None, :, :], axis=-1), 1.0)
    qy = [q for q in ry if a < q < b]
    bounds = np.array([a] + qy + [b])
    ncell = len(bounds) - 1

    def ycell_lo(g):
        # cell providing the value AT g (right-continuous)
        return np.clip(np.searchsorted(bounds, g, side="right") - 1, 0, ncell - 1)

    def ycell_hi(g):
        # last cell crossed strictly below g (an image exactly on a y jump
        # belongs to the matched point, not to the cell beyond it)
        return np.clip(np.searchsorted(bounds, g, side="left") - 1, 0, ncell - 1)

    ylev = np.array([int(np.searchsorted(ry, 0.5 * (bounds[c] + bounds[c + 1]),
                                         side="right")) for c in range(ncell)])
    lev0 = int(np.searchsorted(rx, a, side="right"))
    xlev = [lev0 + k for k in range(p + 1)]
    R = []
    for seg in range(p + 1):
        d = PD[xlev[seg], ylev]
        tab = np.full((ncell, ncell), np.inf)
        for c0 in range(ncell):
            tab[c0, c0:] = np.maximum.accumulate(d[c0:])
        R.append(tab)
    d_a = PD[int(np.searchsorted(rx, a, side="right")),
             int(np.searchsorted(ry, a, side="right"))]
    d_b = PD[int(np.searchsorted(rx, b, side="right")),
             int(np.searchsorted(ry, b, side="right"))]
    base = max(d_a, d_b)
    first_cell = int(ycell_lo(np.array([a]))[0])
    last_cell = int(ycell_hi(np.array([b]))[0])
    if p == 0:
        return min(max(base, R[0][first_cell, last_cell]), 1.0)
    G = np.arange(a + res, b - res / 2, res)
    for q in qy:
        # candidate images must be able to land exactly on y's jumps
        G[int(np.argmin(np.abs(G - q)))] = q
    glo = ycell_lo(G)
    ghi = ycell_hi(G)
    knots = [a] + [float(rx[i]) for i in inx] + [b]
    with np.errstate(divide="ignore"):
        D = np.maximum(np.abs(np.log((G - a) / (knots[1] - knots[0]))),
                       R[0][first_cell, ghi])
        for segi in range(1, p):
            dtk = knots[segi + 1] - knots[segi]
            slope = (G[None, :] - G[:, None]) / dtk
            with np.errstate(invalid="ignore"):
                lip = np.abs(np.log(slope))
            lip[~(G[None, :] > G[:, None])] = np.inf
            cost = np.maximum(lip, R[segi][glo[:, None], ghi[None, :]])
            D = np.min(np.maximum(D[:, None], cost), axis=0)
        lipf = np.abs(np.log((b - G) / (knots[-1] - knots[-2])))
    total = np.min(np.maximum(D, np.maximum(lipf, R[p][glo, last_cell])))
    return min(max(base, float(total)), 1.0)


def gauss_expectation(f, mean, std, n_nodes=120):
    """E f(mean + std Z) with Z standard normal, by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    pts = mean + std * math.sqrt(2.0) * nodes
    vals = np.array([float(f(np.array([p]))) for p in pts])
    return float(np.dot(weights, vals) / math.sqrt(math.pi))


def heat_cos(t, x0=0.0):
    """E cos(x0 + B_t) for Brownian motion."""
    return math.exp(-t / 2.0) * math.cos(x0)


def delayed_linear_solution(t):
    """Method of steps for y' = y(t-1), constant unit history: piecewise
    polynomial on [0, 2]."""
    if t <= 0:
        return 1.0
    if t <= 1:
        return 1.0 + t
    return 2.0 + (t - 1.0) + 0.5 * (t - 1.0) ** 2
