"""Fused loss/gradient kernel for training.

One pass over the quadrature points computes the residual and accumulates
every gradient without materializing ``(N, n)`` temporaries.  Compiled with
numba when it is importable; otherwise :data:`fused_objective` is ``None``
and the NumPy path in :mod:`ane.optimize` is used.
"""

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly when numba is installed
    import numba
except ImportError:  # pragma: no cover
    numba = None

__all__ = ["HAVE_NUMBA", "fused_objective"]


def _objective_loops(X, w, y, c0, c, omT, b):
    # inner loops run over neurons so that they vectorize
    N, d = X.shape
    n = b.shape[0]
    g_c = np.zeros(n)
    hit = np.zeros(n)
    g_w = np.zeros((d, n))
    z = np.empty(n)
    h = np.empty(n)
    sq = 0.0
    g_c0 = 0.0
    for k in range(N):
        for i in range(n):
            z[i] = -b[i]
        for j in range(d):
            xj = X[k, j]
            for i in range(n):
                z[i] += xj * omT[j, i]
        v = c0
        for i in range(n):
            v += c[i] * max(z[i], 0.0)
        r = v - y[k]
        wr = w[k] * r
        sq += wr * r
        g_c0 += wr
        for i in range(n):
            hi = wr if z[i] > 0.0 else 0.0
            h[i] = hi
            g_c[i] += hi * z[i]
            hit[i] += hi
        for j in range(d):
            xj = X[k, j]
            for i in range(n):
                g_w[j, i] += h[i] * xj
    return 0.5 * sq, g_c0, g_c, hit, g_w


HAVE_NUMBA = numba is not None and os.environ.get("ANE_DISABLE_NUMBA", "") == ""

if HAVE_NUMBA:
    fused_objective = numba.njit(cache=True, fastmath=True, nogil=True)(_objective_loops)
else:  # pragma: no cover
    fused_objective = None
