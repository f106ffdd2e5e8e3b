# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for distance matrices and furthest-point-first ordering.

Must stay behaviourally identical to ``_pykernels``; ties always resolve to
the lowest index.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def bisect_matrix(const cnp.int64_t[::1] timestamps):
    cdef Py_ssize_t n = timestamps.shape[0], i, j
    cdef cnp.int64_t d
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(i + 1, n):
            d = timestamps[i] - timestamps[j]
            if d < 0:
                d = -d
            o[i, j] = <double>d
            o[j, i] = <double>d
    return out


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def mismatch_matrix(const cnp.int64_t[::1] levels, const cnp.uint8_t[:, ::1] bits):
    cdef Py_ssize_t n = bits.shape[0], m = bits.shape[1], i, j, k
    cdef Py_ssize_t words = (m + 63) // 64
    cdef cnp.int64_t c
    # pack each row into 64-bit words so a pair costs ``words`` popcounts
    packed_arr = np.zeros((n, max(words, 1)), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] packed = packed_arr
    for i in range(n):
        for k in range(m):
            if bits[i, k]:
                packed[i, k >> 6] |= (<cnp.uint64_t>1) << (k & 63)
    out = np.zeros((n, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                c = 1 if levels[i] != levels[j] else 0
                for k in range(words):
                    c += __builtin_popcountll(packed[i, k] ^ packed[j, k])
                o[i, j] = c
                o[j, i] = c
    return out


def fpf_order(const double[:, ::1] dist, Py_ssize_t start):
    cdef Py_ssize_t n = dist.shape[0], k, j, best, nxt
    cdef double bestv, d
    order = np.empty(n, dtype=np.int64)
    if n == 0:
        return order
    cdef cnp.int64_t[::1] o = order
    mind_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] mind = mind_arr

    # chosen items sit at -inf, so they never win and never rise again
    for j in range(n):
        mind[j] = dist[start, j]
    mind[start] = -INFINITY
    best = start
    with nogil:
        for k in range(n):
            o[k] = best
            mind[best] = -INFINITY
            # fold the newest row into the running minimum and find the next
            # pick in the same sweep; strict > keeps the lowest index on ties
            nxt = -1
            bestv = -INFINITY
            for j in range(n):
                d = dist[best, j]
                if d < mind[j]:
                    mind[j] = d
                if mind[j] > bestv:
                    bestv = mind[j]
                    nxt = j
            if nxt < 0:
                break
            best = nxt
    return order
