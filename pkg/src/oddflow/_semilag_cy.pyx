# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernel: clamped bicubic interpolation on a periodic grid.

Cubic Lagrange interpolation on the 4x4 stencil, with the result clamped
to the min/max of the inner 2x2 nodes so transported bounds are preserved
exactly.  A vectorized numpy twin lives in _semilag_np; the import-time
selector is in semilag.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "math.h":
    double floor(double x) nogil


cdef inline void _weights(double t, double* w) noexcept nogil:
    w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0
    w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0
    w[3] = (t + 1.0) * t * (t - 1.0) / 6.0


def bicubic_periodic(
    cnp.ndarray[cnp.float64_t, ndim=2] values,
    cnp.ndarray[cnp.float64_t, ndim=1] x1,
    cnp.ndarray[cnp.float64_t, ndim=1] x2,
    double h1,
    double h2,
    bint clamp=True,
):
    """Sample `values` (periodic, node spacing h1 x h2) at points (x1, x2)."""
    cdef Py_ssize_t n1 = values.shape[0]
    cdef Py_ssize_t n2 = values.shape[1]
    cdef Py_ssize_t m = x1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t p, a, b, ia, ib
    cdef double s1, s2, t1, t2, acc, row, lo, hi, v
    cdef double w1[4]
    cdef double w2[4]
    cdef Py_ssize_t i1, i2

    for p in range(m):
        s1 = x1[p] / h1
        s2 = x2[p] / h2
        i1 = <Py_ssize_t> floor(s1)
        i2 = <Py_ssize_t> floor(s2)
        t1 = s1 - i1
        t2 = s2 - i2
        _weights(t1, w1)
        _weights(t2, w2)
        acc = 0.0
        lo = 1e300
        hi = -1e300
        for a in range(4):
            ia = (i1 + a - 1) % n1
            if ia < 0:
                ia += n1
            row = 0.0
            for b in range(4):
                ib = (i2 + b - 1) % n2
                if ib < 0:
                    ib += n2
                v = values[ia, ib]
                row += w2[b] * v
                if 1 <= a <= 2 and 1 <= b <= 2:
                    if v < lo:
                        lo = v
                    if v > hi:
                        hi = v
            acc += w1[a] * row
        if clamp:
            if acc < lo:
                acc = lo
            elif acc > hi:
                acc = hi
        out[p] = acc
    return out
