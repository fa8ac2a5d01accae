"""Numpy fallback for the hot kernels.

Same contracts as the compiled backend: deterministic results, compensated
sums exact to within an ulp or two of correct rounding. Used automatically
when the extension is missing or when NORMLAB_FORCE_NUMPY is set.
"""

import math

import numpy as np

BACKEND = "numpy"

# Chunk size for the (points x functionals) products in max_dot; keeps the
# intermediate below ~16 MB for 64 functionals.
_CHUNK = 1 << 15


def lp_gauge(pts, p):
    """p-norm of each row of an (n, 2) array; p = inf is the max norm."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    ax = np.abs(pts[:, 0])
    ay = np.abs(pts[:, 1])
    if p == math.inf:
        return np.maximum(ax, ay)
    if p == 1.0:
        return ax + ay
    if p == 2.0:
        return np.hypot(ax, ay)
    m = np.maximum(ax, ay)
    out = np.zeros_like(m)
    nz = m > 0.0
    # scale by the max coordinate so that x**p cannot overflow for large p
    rx = ax[nz] / m[nz]
    ry = ay[nz] / m[nz]
    out[nz] = m[nz] * (rx**p + ry**p) ** (1.0 / p)
    return out


def max_dot(pts, funcs):
    """max_k <row, funcs[k]> per row; the gauge of a polytope given its
    supporting functionals (antipodal pairs included by the caller)."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    funcs = np.ascontiguousarray(funcs, dtype=np.float64)
    n = pts.shape[0]
    out = np.empty(n, dtype=np.float64)
    ft = funcs.T
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        np.max(pts[lo:hi] @ ft, axis=1, out=out[lo:hi])
    return out


def comp_sum(x):
    """Compensated sum, exactly rounded (math.fsum)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return math.fsum(x)


def comp_dot(x, w):
    """Compensated sum of elementwise products x[i]*w[i].

    Each product is rounded once (as in the compiled backend); the summation
    of the rounded products is exact.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return math.fsum(x * w)
