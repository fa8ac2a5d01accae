# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: batch gauge evaluation and compensated reductions.

These are the inner loops that dominate runtime on million-atom point
clouds. Semantics match normlab._kernels._numpy_backend; the compensated
sums here use Neumaier's variant of Kahan summation (error within one ulp
of the exactly rounded result) with a fixed sequential order, so results
are deterministic.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, hypot, pow

cnp.import_array()

BACKEND = "cython"


def lp_gauge(pts, double p):
    """p-norm of each row of an (n, 2) array; p = inf is the max norm."""
    cdef const double[:, ::1] a = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double ax, ay, m, rx, ry
    if p == INFINITY:
        for i in range(n):
            ax = fabs(a[i, 0]); ay = fabs(a[i, 1])
            out[i] = ax if ax >= ay else ay
    elif p == 1.0:
        for i in range(n):
            out[i] = fabs(a[i, 0]) + fabs(a[i, 1])
    elif p == 2.0:
        for i in range(n):
            out[i] = hypot(a[i, 0], a[i, 1])
    else:
        for i in range(n):
            ax = fabs(a[i, 0]); ay = fabs(a[i, 1])
            m = ax if ax >= ay else ay
            if m == 0.0:
                out[i] = 0.0
            else:
                rx = ax / m; ry = ay / m
                out[i] = m * pow(pow(rx, p) + pow(ry, p), 1.0 / p)
    return out_arr


def max_dot(pts, funcs):
    """max_k <row, funcs[k]> per row (polytope gauge via supporting
    functionals; antipodal pairs included by the caller)."""
    cdef const double[:, ::1] a = np.ascontiguousarray(pts, dtype=np.float64)
    cdef const double[:, ::1] f = np.ascontiguousarray(funcs, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = f.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double best, d, x, y
    for i in range(n):
        x = a[i, 0]; y = a[i, 1]
        best = x * f[0, 0] + y * f[0, 1]
        for k in range(1, m):
            d = x * f[k, 0] + y * f[k, 1]
            if d > best:
                best = d
        out[i] = best
    return out_arr


cdef inline double _neumaier(const double* x, const double* w, Py_ssize_t n) noexcept:
    cdef double s = 0.0, c = 0.0, t, v
    cdef Py_ssize_t i
    for i in range(n):
        v = x[i] if w is NULL else x[i] * w[i]
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def comp_sum(x):
    """Compensated (Neumaier) sum, sequential fixed order."""
    cdef const double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    if a.shape[0] == 0:
        return 0.0
    return _neumaier(&a[0], NULL, a.shape[0])


def comp_dot(x, w):
    """Compensated sum of elementwise products x[i]*w[i]."""
    cdef const double[::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(w, dtype=np.float64)
    if a.shape[0] != b.shape[0]:
        raise ValueError("length mismatch")
    if a.shape[0] == 0:
        return 0.0
    return _neumaier(&a[0], &b[0], a.shape[0])
