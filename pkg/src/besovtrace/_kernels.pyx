# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled counterparts of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = z + 0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _prefix(uint64_t seed, uint64_t j, uint64_t lmask) nogil:
    cdef uint64_t h = _mix(seed)
    h = _mix(h ^ j)
    return _mix(h ^ lmask)


def rademacher(seed, int j, int lmask, K):
    cdef int64_t[:, ::1] k = np.ascontiguousarray(K, dtype=np.int64)
    cdef Py_ssize_t n = k.shape[0], dim = k.shape[1], i, c
    out = np.empty(n)
    cdef double[::1] o = out
    cdef uint64_t p = _prefix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF), j, lmask), h
    with nogil:
        for i in range(n):
            h = p
            for c in range(dim):
                h = _mix(h ^ <uint64_t>k[i, c])
            o[i] = 1.0 if (h >> 63) == 0 else -1.0
    return out


def signed_block_sum(seed, int j, int lmask, Kd, Kp, W):
    cdef int64_t[:, ::1] kd = np.ascontiguousarray(Kd, dtype=np.int64)
    cdef int64_t[:, ::1] kp = np.ascontiguousarray(Kp, dtype=np.int64)
    cdef double[::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n = kd.shape[0], d = kd.shape[1]
    cdef Py_ssize_t m = kp.shape[0], dp = kp.shape[1]
    cdef Py_ssize_t i, a, c
    cdef uint64_t p = _prefix(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF), j, lmask), base, h
    cdef double acc
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            base = p
            for c in range(d):
                base = _mix(base ^ <uint64_t>kd[i, c])
            acc = 0.0
            for a in range(m):
                h = base
                for c in range(dp):
                    h = _mix(h ^ <uint64_t>kp[a, c])
                if (h >> 63) == 0:
                    acc += w[a]
                else:
                    acc -= w[a]
            o[i] = acc
    return out
