"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are selected when the compiled
module is unavailable or when ``GRAPHINDEX_PURE_PYTHON=1`` is set.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


def banded_ldl_inertia(band: np.ndarray, shift_band: np.ndarray | None = None,
                       shift: float = 0.0, pivot_floor: float = 0.0):
    """Inertia of a symmetric banded matrix by LDL^T without pivoting.

    ``band`` uses LAPACK lower storage: ``band[i, j] = A[j + i, j]``.  When
    ``shift_band`` is given the factorized matrix is ``A - shift * B``.
    Returns ``(n_neg, n_zero, n_pos, min_abs_pivot)``; pivots with absolute
    value at most ``pivot_floor`` count as zero.
    """
    band = np.asarray(band, dtype=float)
    bw = band.shape[0] - 1
    n = band.shape[1]
    a = band.copy() if shift_band is None else band - shift * np.asarray(shift_band, float)
    # Skewed full-band storage s[r, bw + c - r] = A[r, c], padded by bw rows.
    s = np.zeros((n + bw, 2 * bw + 1))
    for i in range(bw + 1):
        s[i:n, bw - i] = a[i, : n - i]
        s[: n - i, bw + i] = a[i, : n - i]
    rs, cs = s.strides
    neg = zero = pos = 0
    min_piv = np.inf
    for j in range(n):
        d = s[j, bw]
        ad = abs(d)
        if ad < min_piv:
            min_piv = ad
        if ad <= pivot_floor:
            zero += 1
            if d == 0.0:
                d = pivot_floor if pivot_floor > 0 else np.finfo(float).tiny
        elif d < 0:
            neg += 1
        else:
            pos += 1
        if bw == 0:
            continue
        col = as_strided(s[j + 1:, bw - 1:], shape=(bw,), strides=(rs - cs,)).copy()
        if not col.any():
            continue
        win = as_strided(s[j + 1:, bw:], shape=(bw, bw), strides=(rs - cs, cs))
        win -= np.outer(col, col) / d
    return neg, zero, pos, float(min_piv)


def chain_products(steps: np.ndarray) -> np.ndarray:
    """Cumulative products ``out[k] = steps[k-1] @ ... @ steps[0]``, ``out[0] = I``."""
    steps = np.asarray(steps, dtype=float)
    n, m, _ = steps.shape
    out = np.empty((n + 1, m, m))
    out[0] = np.eye(m)
    for k in range(n):
        np.matmul(steps[k], out[k], out=out[k + 1])
    return out
