# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see ``_pykernels`` for the reference)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def banded_ldl_inertia(band, shift_band=None, double shift=0.0, double pivot_floor=0.0):
    """Inertia of a symmetric banded matrix by LDL^T without pivoting.

    Same contract as the numpy fallback: lower band storage, optional shifted
    matrix ``A - shift * B``, returns ``(n_neg, n_zero, n_pos, min_abs_pivot)``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a
    if shift_band is None:
        a = np.array(band, dtype=np.float64, order="C", copy=True)
    else:
        a = np.ascontiguousarray(np.asarray(band, dtype=np.float64)
                                 - shift * np.asarray(shift_band, dtype=np.float64))
    cdef double[:, ::1] w = a
    cdef Py_ssize_t bw = w.shape[0] - 1
    cdef Py_ssize_t n = w.shape[1]
    cdef Py_ssize_t j, i, k, lim
    cdef double d, ad, li, min_piv = INFINITY
    cdef long neg = 0, zero = 0, pos = 0
    cdef double tiny = np.finfo(np.float64).tiny
    with nogil:
        for j in range(n):
            d = w[0, j]
            ad = fabs(d)
            if ad < min_piv:
                min_piv = ad
            if ad <= pivot_floor:
                zero += 1
                if d == 0.0:
                    d = pivot_floor if pivot_floor > 0 else tiny
            elif d < 0:
                neg += 1
            else:
                pos += 1
            lim = bw
            if j + lim > n - 1:
                lim = n - 1 - j
            # trailing update A[j+i, j+k] -= A[j+i, j] A[j+k, j] / d, i >= k >= 1
            for k in range(1, lim + 1):
                li = w[k, j] / d
                if li == 0.0:
                    continue
                for i in range(k, lim + 1):
                    w[i - k, j + k] -= w[i, j] * li
    return int(neg), int(zero), int(pos), float(min_piv)


def chain_products(steps):
    """Cumulative products ``out[k] = steps[k-1] @ ... @ steps[0]``, ``out[0] = I``."""
    cdef double[:, :, ::1] s = np.ascontiguousarray(steps, dtype=np.float64)
    cdef Py_ssize_t nsteps = s.shape[0], m = s.shape[1]
    out_arr = np.empty((nsteps + 1, m, m), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, i, j, l
    cdef double acc
    with nogil:
        for i in range(m):
            for j in range(m):
                out[0, i, j] = 1.0 if i == j else 0.0
        for k in range(nsteps):
            for i in range(m):
                for j in range(m):
                    acc = 0.0
                    for l in range(m):
                        acc = acc + s[k, i, l] * out[k, l, j]
                    out[k + 1, i, j] = acc
    return out_arr
