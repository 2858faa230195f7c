"""Compiled inner loops shared by flows and iterations."""

import numba
import numpy as np


@numba.njit(cache=True)
def march(x, coeffs, expo, add_x, scale, steps, lo, hi, check):
    """In place: x <- add_x * x + scale[p] * P(x), ``steps`` times per point.

    P is the polynomial map with coefficient table ``coeffs`` (n, M) over the
    exponent rows ``expo`` (M, n).  With ``check`` the orbit must stay in the
    box [lo, hi]; the return value holds, per point, the first step that
    left it (or -1).
    """
    P, n = x.shape
    M = expo.shape[0]
    escaped = np.full(P, -1, dtype=np.int64)
    mono = np.empty(M)
    v = np.empty(n)
    for p in range(P):
        for s in range(steps):
            for j in range(M):
                t = 1.0
                for i in range(n):
                    for _ in range(expo[j, i]):
                        t *= x[p, i]
                mono[j] = t
            for l in range(n):
                acc = 0.0
                for j in range(M):
                    acc += coeffs[l, j] * mono[j]
                v[l] = acc
            out = False
            for l in range(n):
                x[p, l] = add_x * x[p, l] + scale[p] * v[l]
                if check and not (lo[l] <= x[p, l] <= hi[l]):
                    out = True
            if out:
                escaped[p] = s + 1
                break
    return escaped
