# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cumulative ball sums on a periodic grid (compiled core)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def ball_sums(const double[:, :, ::1] weights,
              const cnp.int64_t[:, ::1] centers,
              const cnp.int64_t[:, ::1] offsets,
              const cnp.int64_t[::1] breaks):
    """For each center, sums of ``weights`` over the first ``breaks[j]`` offsets.

    Offsets are consumed in the given order with a single running sum, so the
    result is bit-identical to a sequential cumulative sum. ``breaks`` may come
    in any order.
    """
    cdef Py_ssize_t n0 = weights.shape[0], n1 = weights.shape[1], n2 = weights.shape[2]
    cdef Py_ssize_t nc = centers.shape[0], no = offsets.shape[0], nb = breaks.shape[0]
    cdef Py_ssize_t c, o, b, i, j, k
    cdef cnp.int64_t ci, cj, ck
    cdef double acc
    cdef cnp.int64_t[::1] order = np.argsort(np.asarray(breaks), kind="stable").astype(np.int64)
    cdef cnp.int64_t[::1] sorted_breaks = np.ascontiguousarray(np.asarray(breaks)[np.asarray(order)])
    out_arr = np.zeros((nc, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for c in range(nc):
        ci = centers[c, 0]
        cj = centers[c, 1]
        ck = centers[c, 2]
        acc = 0.0
        b = 0
        while b < nb and sorted_breaks[b] == 0:
            out[c, order[b]] = 0.0
            b += 1
        for o in range(no):
            i = (ci + offsets[o, 0]) % n0
            j = (cj + offsets[o, 1]) % n1
            k = (ck + offsets[o, 2]) % n2
            if i < 0:
                i += n0
            if j < 0:
                j += n1
            if k < 0:
                k += n2
            acc = acc + weights[i, j, k]
            while b < nb and sorted_breaks[b] == o + 1:
                out[c, order[b]] = acc
                b += 1
            if b == nb:
                break
    return out_arr
