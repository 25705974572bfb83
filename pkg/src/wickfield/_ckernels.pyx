# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels (see ``_pykernels`` for the reference versions)."""
import numpy as np
cimport numpy as cnp
from libcpp.unordered_map cimport unordered_map
from libc.stdint cimport int64_t

cnp.import_array()


def sparse_convolve(keys_a, w_a, keys_b, w_b):
    cdef const int64_t[::1] ka = np.ascontiguousarray(keys_a, dtype=np.int64)
    cdef const double[::1] wa = np.ascontiguousarray(w_a, dtype=np.float64)
    cdef const int64_t[::1] kb = np.ascontiguousarray(keys_b, dtype=np.int64)
    cdef const double[::1] wb = np.ascontiguousarray(w_b, dtype=np.float64)
    cdef Py_ssize_t na = ka.shape[0], nb = kb.shape[0], i, k
    cdef unordered_map[int64_t, double] acc
    cdef double wi
    cdef int64_t ki
    acc.reserve(min(na * nb, <Py_ssize_t>(1 << 24)))
    for i in range(na):
        ki = ka[i]
        wi = wa[i]
        for k in range(nb):
            acc[ki + kb[k]] += wi * wb[k]
    cdef Py_ssize_t n = acc.size()
    keys = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    cdef int64_t[::1] ko = keys
    cdef double[::1] vo = vals
    i = 0
    for item in acc:
        ko[i] = item.first
        vo[i] = item.second
        i += 1
    order = np.argsort(keys, kind="stable")
    return keys[order], vals[order]


def hermite_stack(x, double sigma, int jmax):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty((jmax + 1,) + xa.shape, dtype=np.float64)
    cdef const double[::1] xf = xa.reshape(-1)
    cdef double[:, ::1] o = out.reshape(jmax + 1, -1)
    cdef Py_ssize_t m = xf.shape[0], i
    cdef int k
    cdef double xv, hm, hc, hn
    for i in range(m):
        xv = xf[i]
        o[0, i] = 1.0
        if jmax >= 1:
            o[1, i] = xv
        hm = 1.0
        hc = xv
        for k in range(1, jmax):
            hn = xv * hc - k * sigma * hm
            o[k + 1, i] = hn
            hm = hc
            hc = hn
    return out


def hermite_eval(x, double sigma, int j):
    xa = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty_like(xa)
    cdef const double[::1] xf = xa.reshape(-1)
    cdef double[::1] o = out.reshape(-1)
    cdef Py_ssize_t m = xf.shape[0], i
    cdef int k
    cdef double xv, hm, hc, hn
    for i in range(m):
        xv = xf[i]
        if j == 0:
            o[i] = 1.0
            continue
        hm = 1.0
        hc = xv
        for k in range(1, j):
            hn = xv * hc - k * sigma * hm
            hm = hc
            hc = hn
        o[i] = hc
    return out
