# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: pool-adjacent-violators and per-bin moments."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def pava(const double[::1] y, const double[::1] w):
    """Weighted isotonic (non-decreasing) fit by pool-adjacent-violators.

    Adjacent blocks are pooled while the left mean is >= the right mean, so
    the returned level sets are maximal and their values strictly increase.

    Returns ``(values, weights, starts)`` describing the level sets.
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i, top = -1
    cdef double wsum, vsum
    values = np.empty(n, dtype=np.float64)
    weights = np.empty(n, dtype=np.float64)
    starts = np.empty(n, dtype=np.intp)
    cdef double[::1] v = values
    cdef double[::1] ws = weights
    cdef Py_ssize_t[::1] st = starts

    for i in range(n):
        top += 1
        v[top] = y[i]
        ws[top] = w[i]
        st[top] = i
        while top > 0 and v[top - 1] >= v[top]:
            wsum = ws[top - 1] + ws[top]
            vsum = v[top - 1] * ws[top - 1] + v[top] * ws[top]
            v[top - 1] = vsum / wsum
            ws[top - 1] = wsum
            top -= 1
    return values[:top + 1].copy(), weights[:top + 1].copy(), starts[:top + 1].copy()


def binned_moments(const double[::1] u, const double[::1] e, const Py_ssize_t[::1] bounds):
    """Per-bin RMV, RMSE and sample variance of z = e/u.

    ``u`` and ``e`` are already in binning order; bin ``k`` covers
    ``[bounds[k], bounds[k+1])``. Bins of size 1 get a NaN variance.
    """
    cdef Py_ssize_t nb = bounds.shape[0] - 1
    cdef Py_ssize_t k, j, lo, hi, n
    cdef double su2, se2, sz, mz, d, ss, z
    rmv_arr = np.empty(nb, dtype=np.float64)
    rmse_arr = np.empty(nb, dtype=np.float64)
    zvar_arr = np.empty(nb, dtype=np.float64)
    cdef double[::1] rmv = rmv_arr
    cdef double[::1] rmse = rmse_arr
    cdef double[::1] zvar = zvar_arr

    for k in range(nb):
        lo = bounds[k]
        hi = bounds[k + 1]
        n = hi - lo
        su2 = 0.0
        se2 = 0.0
        sz = 0.0
        for j in range(lo, hi):
            su2 += u[j] * u[j]
            se2 += e[j] * e[j]
            sz += e[j] / u[j]
        rmv[k] = sqrt(su2 / n)
        rmse[k] = sqrt(se2 / n)
        if n < 2:
            zvar[k] = float("nan")
            continue
        mz = sz / n
        ss = 0.0
        for j in range(lo, hi):
            d = e[j] / u[j] - mz
            ss += d * d
        zvar[k] = ss / (n - 1)
    return rmv_arr, rmse_arr, zvar_arr
