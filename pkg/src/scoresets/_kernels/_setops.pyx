# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of scoresets._kernels._pure.

Single-pass C loops over the score matrix: conformity gathers, coverage
counting, CSR set construction and set membership. Outputs are bit-identical
to the numpy fallback (comparisons and integer counting only).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conformity(const double[:, ::1] probs, const long long[::1] labels):
    cdef Py_ssize_t n = probs.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    for i in range(n):
        ov[i] = 1.0 - probs[i, labels[i]]
    return out


def count_covered(const double[:, ::1] probs, const long long[::1] labels, double q_hat):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t i
    cdef long long hits = 0
    for i in range(n):
        if 1.0 - probs[i, labels[i]] <= q_hat:
            hits += 1
    return int(hits)


def build_sets(const double[:, ::1] probs, double q_hat, bint force_argmax):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t k = probs.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] offsets = np.zeros(n + 1, dtype=np.int64)
    cdef long long[::1] off = offsets
    cdef cnp.ndarray[cnp.int32_t, ndim=1] indices
    cdef int[::1] idx
    cdef Py_ssize_t i, j, pos
    cdef Py_ssize_t row_count
    cdef Py_ssize_t best
    cdef double best_p
    cdef long long total = 0

    # first pass: per-row set sizes
    for i in range(n):
        row_count = 0
        for j in range(k):
            if 1.0 - probs[i, j] <= q_hat:
                row_count += 1
        if row_count == 0 and force_argmax:
            row_count = 1
        total += row_count
        off[i + 1] = total

    indices = np.empty(total, dtype=np.int32)
    idx = indices

    # second pass: fill ascending indices
    for i in range(n):
        pos = off[i]
        if off[i + 1] == pos:
            continue
        row_count = 0
        for j in range(k):
            if 1.0 - probs[i, j] <= q_hat:
                idx[pos] = <int> j
                pos += 1
                row_count += 1
        if row_count == 0:
            # forced argmax, lowest index wins ties
            best = 0
            best_p = probs[i, 0]
            for j in range(1, k):
                if probs[i, j] > best_p:
                    best_p = probs[i, j]
                    best = j
            idx[pos] = <int> best
    return indices, offsets


def set_membership(const int[::1] indices, const long long[::1] offsets, const long long[::1] labels):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] covered = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] cov = covered
    cdef Py_ssize_t i
    cdef long long lo, hi, mid, y
    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        y = labels[i]
        while lo < hi:
            mid = (lo + hi) // 2
            if indices[mid] < y:
                lo = mid + 1
            elif indices[mid] > y:
                hi = mid
            else:
                cov[i] = 1
                break
    return covered
