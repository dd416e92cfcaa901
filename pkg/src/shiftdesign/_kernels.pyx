# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the inner loops in :mod:`shiftdesign._kernels_py`.

Signatures and results match the pure-Python module exactly; only the
summation order inside ``propagate_round`` is shared by construction.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def fill_block_columns(const double[:, :, ::1] suffixes,
                       const double[:, ::1] prefix,
                       const double[::1] weights,
                       const cnp.intp_t[::1] receivers,
                       const cnp.intp_t[::1] senders,
                       double[:, ::1] out):
    cdef Py_ssize_t n_stages = suffixes.shape[0]
    cdef Py_ssize_t n = prefix.shape[0]
    cdef Py_ssize_t n_edges = receivers.shape[0]
    cdef Py_ssize_t nn = n * n
    cdef Py_ssize_t l, k, a, b, rec, snd, base
    cdef double w, cb
    for l in range(n_stages):
        w = weights[l]
        for k in range(n_edges):
            rec = receivers[k]
            snd = senders[k]
            for b in range(n):
                cb = w * prefix[snd, b]
                base = l * nn + b * n
                for a in range(n):
                    out[base + a, k] = cb * suffixes[l, a, rec]


def propagate_round(const cnp.intp_t[::1] indptr,
                    const cnp.intp_t[::1] indices,
                    const double[::1] data,
                    const double[::1] prev,
                    double[::1] out):
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i, e
    cdef double acc
    for i in range(n):
        acc = 0.0
        for e in range(indptr[i], indptr[i + 1]):
            acc += data[e] * prev[indices[e]]
        out[i] = acc
