# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled gather/scatter kernels over COO-indexed entry lists.

Entries are processed strictly in storage order, so accumulation is
deterministic for a fixed input.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pair_scores(const cnp.int32_t[::1] rows,
                const cnp.int32_t[::1] cols,
                const double[:, ::1] left,
                const double[:, ::1] right):
    """Return out[e] = dot(left[rows[e]], right[cols[e]])."""
    cdef Py_ssize_t e, c
    cdef Py_ssize_t ne = rows.shape[0]
    cdef Py_ssize_t r = left.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(ne, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    for e in range(ne):
        acc = 0.0
        for c in range(r):
            acc += left[rows[e], c] * right[cols[e], c]
        o[e] = acc
    return out


def scatter_rows(const cnp.int32_t[::1] rows,
                 const cnp.int32_t[::1] cols,
                 const double[::1] coeff,
                 const double[:, ::1] source,
                 double[:, ::1] out):
    """Accumulate out[rows[e]] += coeff[e] * source[cols[e]] in entry order."""
    cdef Py_ssize_t e, c
    cdef Py_ssize_t ne = rows.shape[0]
    cdef Py_ssize_t r = source.shape[1]
    cdef double ce
    cdef Py_ssize_t ri, ci
    for e in range(ne):
        ce = coeff[e]
        ri = rows[e]
        ci = cols[e]
        for c in range(r):
            out[ri, c] += ce * source[ci, c]
