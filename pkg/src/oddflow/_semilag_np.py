"""Pure-numpy twin of the compiled bicubic kernel (see _semilag_cy.pyx)."""

import numpy as np


def _weights(t):
    return (
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    )


def bicubic_periodic(values, x1, x2, h1, h2, clamp=True):
    """Clamped cubic Lagrange interpolation on a periodic grid.

    Same contract as the compiled kernel: sample `values` at points
    (x1, x2); with clamp=True the result is limited to the min/max of the
    surrounding 2x2 nodes.
    """
    n1, n2 = values.shape
    s1 = x1 / h1
    s2 = x2 / h2
    i1 = np.floor(s1).astype(np.int64)
    i2 = np.floor(s2).astype(np.int64)
    t1 = s1 - i1
    t2 = s2 - i2
    w1 = _weights(t1)
    w2 = _weights(t2)
    acc = np.zeros_like(s1)
    lo = np.full_like(s1, np.inf)
    hi = np.full_like(s1, -np.inf)
    for a in range(4):
        ia = np.mod(i1 + a - 1, n1)
        row = np.zeros_like(s1)
        for b in range(4):
            ib = np.mod(i2 + b - 1, n2)
            v = values[ia, ib]
            row += w2[b] * v
            if 1 <= a <= 2 and 1 <= b <= 2:
                lo = np.minimum(lo, v)
                hi = np.maximum(hi, v)
        acc += w1[a] * row
    if clamp:
        acc = np.clip(acc, lo, hi)
    return acc
