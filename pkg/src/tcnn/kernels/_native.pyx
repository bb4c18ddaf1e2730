# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled window-reduction kernels.

Semantics match tcnn.kernels.numpy_backend exactly: ties resolve to the
first (lowest) flat kernel index, fully padded windows yield arg -1 with
an infinite sentinel, and backward sums accumulate in float64 in
ascending flat index order before the final float32 cast.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport INFINITY

MODE_MIN = 0
MODE_MAX = 1


def window_reduce(const float[:, :, ::1] x, const float[:, :, ::1] w,
                  const cnp.int64_t[:, ::1] table, int mode):
    cdef Py_ssize_t n_batch = x.shape[0], c_in = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0], k_size = w.shape[2]
    cdef Py_ssize_t n_pos = table.shape[0]

    vals_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.float32)
    args_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.int32)
    cdef float[:, :, :, ::1] vals = vals_arr
    cdef int[:, :, :, ::1] args = args_arr

    cdef Py_ssize_t n, co, ci, p, k
    cdef cnp.int64_t idx
    cdef float best, cand
    cdef int barg
    cdef bint is_min = (mode == MODE_MIN)

    # samples are independent: parallelize over the batch, writes disjoint in n
    for n in prange(n_batch, nogil=True, schedule="static"):
        for co in range(c_out):
            for ci in range(c_in):
                for p in range(n_pos):
                    barg = -1
                    best = INFINITY if is_min else -INFINITY
                    for k in range(k_size):
                        idx = table[p, k]
                        if idx < 0:
                            continue
                        cand = x[n, ci, idx] + w[co, ci, k]
                        if barg < 0 or (cand < best if is_min else cand > best):
                            best = cand
                            barg = <int>k
                    vals[n, co, ci, p] = best
                    args[n, co, ci, p] = barg
    return vals_arr, args_arr


def compound_reduce(const float[:, :, ::1] x, const float[:, :, ::1] w,
                    const cnp.int64_t[:, ::1] table):
    """Min and max reductions sharing a single pass over the window sums."""
    cdef Py_ssize_t n_batch = x.shape[0], c_in = x.shape[1]
    cdef Py_ssize_t c_out = w.shape[0], k_size = w.shape[2]
    cdef Py_ssize_t n_pos = table.shape[0]

    minv_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.float32)
    mina_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.int32)
    maxv_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.float32)
    maxa_arr = np.empty((n_batch, c_out, c_in, n_pos), dtype=np.int32)
    cdef float[:, :, :, ::1] minv = minv_arr
    cdef int[:, :, :, ::1] mina = mina_arr
    cdef float[:, :, :, ::1] maxv = maxv_arr
    cdef int[:, :, :, ::1] maxa = maxa_arr

    cdef Py_ssize_t n, co, ci, p, k
    cdef cnp.int64_t idx
    cdef float lo, hi, cand
    cdef int lo_arg, hi_arg

    for n in prange(n_batch, nogil=True, schedule="static"):
        for co in range(c_out):
            for ci in range(c_in):
                for p in range(n_pos):
                    lo_arg = -1
                    hi_arg = -1
                    lo = INFINITY
                    hi = -INFINITY
                    for k in range(k_size):
                        idx = table[p, k]
                        if idx < 0:
                            continue
                        cand = x[n, ci, idx] + w[co, ci, k]
                        if lo_arg < 0 or cand < lo:
                            lo = cand
                            lo_arg = <int>k
                        if hi_arg < 0 or cand > hi:
                            hi = cand
                            hi_arg = <int>k
                    minv[n, co, ci, p] = lo
                    mina[n, co, ci, p] = lo_arg
                    maxv[n, co, ci, p] = hi
                    maxa[n, co, ci, p] = hi_arg
    return minv_arr, mina_arr, maxv_arr, maxa_arr


def scatter_backward(const float[:, :, :, ::1] contrib, const int[:, :, :, ::1] args,
                     const cnp.int64_t[:, ::1] table, Py_ssize_t s_in):
    cdef Py_ssize_t n_batch = contrib.shape[0], c_out = contrib.shape[1]
    cdef Py_ssize_t c_in = contrib.shape[2], n_pos = contrib.shape[3]
    cdef Py_ssize_t k_size = table.shape[1]

    gx_arr = np.zeros((n_batch, c_in, s_in), dtype=np.float64)
    gw_arr = np.zeros((c_out, c_in, k_size), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr

    cdef Py_ssize_t n, co, ci, p
    cdef int k
    cdef cnp.int64_t idx
    cdef double g

    with nogil:
        for n in range(n_batch):
            for co in range(c_out):
                for ci in range(c_in):
                    for p in range(n_pos):
                        k = args[n, co, ci, p]
                        if k < 0:
                            continue
                        g = contrib[n, co, ci, p]
                        idx = table[p, k]
                        gx[n, ci, idx] += g
                        gw[co, ci, k] += g
    return gx_arr.astype(np.float32), gw_arr.astype(np.float32)
