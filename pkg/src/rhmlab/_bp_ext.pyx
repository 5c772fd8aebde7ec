# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-layer BP sums; same contract as ``_bp_numpy``."""

import numpy as np


cdef int _normalize_rows(double[:, ::1] rows) noexcept nogil:
    cdef Py_ssize_t a, k
    cdef double z
    cdef int bad = 0
    for a in range(rows.shape[0]):
        z = 0.0
        for k in range(rows.shape[1]):
            z += rows[a, k]
        if z == 0.0:
            bad += 1
            continue
        for k in range(rows.shape[1]):
            rows[a, k] /= z
    return bad


def upward_layer(child_up, rules):
    cdef const double[:, :, ::1] cu = np.ascontiguousarray(child_up, dtype=np.float64)
    cdef const Py_ssize_t[:, :, ::1] R = np.ascontiguousarray(rules, dtype=np.intp)
    cdef Py_ssize_t n = cu.shape[0], v = R.shape[0], m = R.shape[1], s = R.shape[2]
    out = np.zeros((n, v))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t a, y, r, i
    cdef double acc, prod
    cdef int bad
    with nogil:
        for a in range(n):
            for y in range(v):
                acc = 0.0
                for r in range(m):
                    prod = cu[a, 0, R[y, r, 0]]
                    for i in range(1, s):
                        prod = prod * cu[a, i, R[y, r, i]]
                    acc += prod
                o[a, y] = acc
        bad = _normalize_rows(o)
    return out, bad


def downward_layer(parent_down, child_up, rules):
    cdef const double[:, ::1] pd = np.ascontiguousarray(parent_down, dtype=np.float64)
    cdef const double[:, :, ::1] cu = np.ascontiguousarray(child_up, dtype=np.float64)
    cdef const Py_ssize_t[:, :, ::1] R = np.ascontiguousarray(rules, dtype=np.intp)
    cdef Py_ssize_t n = cu.shape[0], v = R.shape[0], m = R.shape[1], s = R.shape[2]
    out = np.zeros((n, s, v))
    cdef double[:, :, ::1] o = out
    cdef double[:, ::1] flat = out.reshape(n * s, v)
    cdef Py_ssize_t a, y, r, i, j
    cdef double w, prod
    cdef int bad
    with nogil:
        for a in range(n):
            for y in range(v):
                w = pd[a, y]
                if w == 0.0:
                    continue
                for r in range(m):
                    for j in range(s):
                        prod = w
                        for i in range(s):
                            if i != j:
                                prod = prod * cu[a, i, R[y, r, i]]
                        o[a, j, R[y, r, j]] += prod
        bad = _normalize_rows(flat)
    return out, bad
