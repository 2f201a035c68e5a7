"""Vectorized evaluation of the window J1 metric over many windows at once.

Used by the exponential-weight quadratures in :mod:`pathspace.metrics` for
pairs of cadlag step paths.  The per-window algorithm is the same monotone
matching enumeration as ``metrics._enumerate_window`` (cross-checked by the
test suite); it is restated here in a numba-compiled form because the
quadrature evaluates tens of thousands of windows.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
from numba import njit

from .metrics import SearchBudget, step_representation
from .paths import SampledPath


@njit(cache=True)
def _sweep_windows(rx, ry, PD, MX, MY, mlen, S, T, IX0, IY0, IXE, IYE, IXB, IYB):
    nS, nT = len(S), len(T)
    out = np.empty((nS, nT))
    kmax = MX.shape[1]
    ts = np.empty(kmax + 2)
    ls = np.empty(kmax + 2)
    for ai in range(nS):
        s = S[ai]
        ix0 = IX0[ai]
        iy0 = IY0[ai]
        for bi in range(nT):
            t = T[bi]
            ixe = IXE[bi]
            iye = IYE[bi]
            dend = PD[IXB[bi], IYB[bi]]
            best = 1.0 + 1e-15
            for mi in range(MX.shape[0]):
                k = mlen[mi]
                if k > 0:
                    if not (rx[MX[mi, 0]] > s and rx[MX[mi, k - 1]] < t):
                        continue
                    if not (ry[MY[mi, 0]] > s and ry[MY[mi, k - 1]] < t):
                        continue
                ts[0] = s
                ls[0] = s
                for q in range(k):
                    ts[q + 1] = rx[MX[mi, q]]
                    ls[q + 1] = ry[MY[mi, q]]
                ts[k + 1] = t
                ls[k + 1] = t
                lip = 0.0
                rejected = False
                for seg in range(k + 1):
                    sl = (ls[seg + 1] - ls[seg]) / (ts[seg + 1] - ts[seg])
                    al = abs(math.log(sl))
                    if al > lip:
                        lip = al
                    if lip >= best:
                        rejected = True
                        break
                if rejected:
                    continue
                cx = ix0
                cy = iy0
                sup = PD[cx, cy]
                if dend > sup:
                    sup = dend
                if (lip if lip > sup else sup) >= best:
                    continue
                seg = 0
                px = rx[cx] if cx < ixe else np.inf
                if cy < iye:
                    q0 = ry[cy]
                    while ls[seg + 1] < q0:
                        seg += 1
                    py = ts[seg] + (q0 - ls[seg]) * (ts[seg + 1] - ts[seg]) / (ls[seg + 1] - ls[seg])
                else:
                    py = np.inf
                while px < np.inf or py < np.inf:
                    if abs(px - py) <= 1e-12:
                        cx += 1
                        cy += 1
                        px = rx[cx] if cx < ixe else np.inf
                        if cy < iye:
                            q0 = ry[cy]
                            while ls[seg + 1] < q0:
                                seg += 1
                            py = ts[seg] + (q0 - ls[seg]) * (ts[seg + 1] - ts[seg]) / (ls[seg + 1] - ls[seg])
                        else:
                            py = np.inf
                    elif px < py:
                        cx += 1
                        px = rx[cx] if cx < ixe else np.inf
                    else:
                        cy += 1
                        if cy < iye:
                            q0 = ry[cy]
                            while ls[seg + 1] < q0:
                                seg += 1
                            py = ts[seg] + (q0 - ls[seg]) * (ts[seg + 1] - ts[seg]) / (ls[seg + 1] - ls[seg])
                        else:
                            py = np.inf
                    d = PD[cx, cy]
                    if d > sup:
                        sup = d
                    if (lip if lip > sup else sup) >= best:
                        rejected = True
                        break
                if rejected:
                    continue
                c = lip if lip > sup else sup
                if c < best:
                    best = c
            out[ai, bi] = best if best <= 1.0 else 1.0
    return out


def _monotone_matchings(p: int, m: int, cap: int):
    """All monotone partial matchings between p and m sorted jumps, padded."""
    if math.comb(p + m, p) > cap:
        return None
    rows_x, rows_y = [], []
    for k in range(0, min(p, m) + 1):
        for mi in combinations(range(p), k):
            for mj in combinations(range(m), k):
                rows_x.append(mi)
                rows_y.append(mj)
    kmax = max(1, min(p, m))
    MX = np.zeros((len(rows_x), kmax), dtype=np.int64)
    MY = np.zeros((len(rows_x), kmax), dtype=np.int64)
    mlen = np.zeros(len(rows_x), dtype=np.int64)
    for r, (mi, mj) in enumerate(zip(rows_x, rows_y)):
        mlen[r] = len(mi)
        MX[r, :len(mi)] = mi
        MY[r, :len(mj)] = mj
    return MX, MY, mlen


def window_values(x: SampledPath, y: SampledPath, S: np.ndarray, T: np.ndarray,
                  budget: SearchBudget):
    """J1 window metric d_s^t for every (s, t) in S x T.

    Returns ``(values, exact)``: exact matching enumeration when the total
    jump count fits the budget, else the identity-time-change upper bound.
    """
    rx, vx = step_representation(x)
    ry, vy = step_representation(y)
    diff = vx[:, None, :] - vy[None, :, :]
    PD = np.minimum(np.sqrt(np.sum(diff * diff, axis=-1)), 1.0)
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    IX0 = np.searchsorted(rx, S, side="right").astype(np.int64)
    IY0 = np.searchsorted(ry, S, side="right").astype(np.int64)
    IXE = np.searchsorted(rx, T, side="left").astype(np.int64)
    IYE = np.searchsorted(ry, T, side="left").astype(np.int64)
    IXB = np.searchsorted(rx, T, side="right").astype(np.int64)
    IYB = np.searchsorted(ry, T, side="right").astype(np.int64)
    packed = _monotone_matchings(len(rx), len(ry), budget.max_matchings)
    if packed is None:
        # identity bound only: sup of level distances over the window
        MX = np.zeros((1, 1), dtype=np.int64)
        MY = np.zeros((1, 1), dtype=np.int64)
        mlen = np.zeros(1, dtype=np.int64)
        vals = _sweep_windows(rx, ry, PD, MX, MY, mlen, S, T, IX0, IY0, IXE, IYE, IXB, IYB)
        return vals, False
    MX, MY, mlen = packed
    vals = _sweep_windows(rx, ry, PD, MX, MY, mlen, S, T, IX0, IY0, IXE, IYE, IXB, IYB)
    return vals, True
