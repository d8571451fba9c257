# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CRF dynamic programs; mirrors ``_pykernels`` exactly in semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef void _lse_step(const double[:] prev, const double[:, :] trans, const double[:] add,
                    double[:] out, double[:] mx, double[:] acc, Py_ssize_t k) noexcept nogil:
    # out[j] = log sum_i exp(prev[i] + trans[i, j]) + add[j], row-major sweeps
    cdef Py_ssize_t i, j
    cdef double p, v
    for j in range(k):
        mx[j] = -INFINITY
        acc[j] = 0.0
    for i in range(k):
        p = prev[i]
        if p == -INFINITY:
            continue
        for j in range(k):
            v = p + trans[i, j]
            if v > mx[j]:
                mx[j] = v
    for i in range(k):
        p = prev[i]
        if p == -INFINITY:
            continue
        for j in range(k):
            v = p + trans[i, j]
            if v != -INFINITY:
                acc[j] += exp(v - mx[j])
    for j in range(k):
        if mx[j] == -INFINITY:
            out[j] = -INFINITY
        else:
            out[j] = mx[j] + log(acc[j]) + add[j]


def forward(const double[:, :] em, const double[:, :] trans,
            const double[:] start, const double[:] end):
    cdef Py_ssize_t n = em.shape[0], k = em.shape[1], t, j
    alpha_arr = np.empty((n, k))
    cdef double[:, :] alpha = alpha_arr
    cdef double[:] mx = np.empty(k)
    cdef double[:] acc = np.empty(k)
    cdef double m = -INFINITY, s = 0.0, v
    with nogil:
        for j in range(k):
            alpha[0, j] = start[j] + em[0, j]
        for t in range(1, n):
            _lse_step(alpha[t - 1], trans, em[t], alpha[t], mx, acc, k)
        for j in range(k):
            v = alpha[n - 1, j] + end[j]
            if v > m:
                m = v
        if m != -INFINITY:
            for j in range(k):
                s += exp(alpha[n - 1, j] + end[j] - m)
            m = m + log(s)
    return alpha_arr, m


def backward(const double[:, :] em, const double[:, :] trans, const double[:] end):
    cdef Py_ssize_t n = em.shape[0], k = em.shape[1], t, i, j
    beta_arr = np.empty((n, k))
    cdef double[:, :] beta = beta_arr
    cdef double m, s, v
    with nogil:
        for j in range(k):
            beta[n - 1, j] = end[j]
        for t in range(n - 2, -1, -1):
            for i in range(k):
                m = -INFINITY
                for j in range(k):
                    v = trans[i, j] + em[t + 1, j] + beta[t + 1, j]
                    if v > m:
                        m = v
                if m == -INFINITY:
                    beta[t, i] = -INFINITY
                    continue
                s = 0.0
                for j in range(k):
                    s += exp(trans[i, j] + em[t + 1, j] + beta[t + 1, j] - m)
                beta[t, i] = m + log(s)
    return beta_arr


def pair_marginal_sum(const double[:, :] em, const double[:, :] trans,
                      const double[:, :] alpha, const double[:, :] beta, double log_z):
    cdef Py_ssize_t n = em.shape[0], k = em.shape[1], t, i, j
    total_arr = np.zeros((k, k))
    cdef double[:, :] total = total_arr
    cdef double v
    with nogil:
        for t in range(n - 1):
            for i in range(k):
                if alpha[t, i] == -INFINITY:
                    continue
                for j in range(k):
                    v = alpha[t, i] + trans[i, j] + em[t + 1, j] + beta[t + 1, j] - log_z
                    if v != -INFINITY:
                        total[i, j] += exp(v)
    return total_arr


def viterbi(const double[:, :] em, const double[:, :] trans,
            const double[:] start, const double[:] end):
    cdef Py_ssize_t n = em.shape[0], k = em.shape[1], t, i, j, arg
    suffix_arr = np.empty((n, k))
    cdef double[:, :] suffix = suffix_arr
    path_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] path = path_arr
    cdef double m, v, best
    with nogil:
        for j in range(k):
            suffix[n - 1, j] = em[n - 1, j] + end[j]
        for t in range(n - 2, -1, -1):
            for i in range(k):
                m = -INFINITY
                for j in range(k):
                    v = trans[i, j] + suffix[t + 1, j]
                    if v > m:
                        m = v
                suffix[t, i] = em[t, i] + m
        arg = 0
        best = start[0] + suffix[0, 0]
        for j in range(1, k):
            v = start[j] + suffix[0, j]
            if v > best:
                best = v
                arg = j
        path[0] = arg
        for t in range(1, n):
            i = path[t - 1]
            arg = 0
            m = trans[i, 0] + suffix[t, 0]
            for j in range(1, k):
                v = trans[i, j] + suffix[t, j]
                if v > m:
                    m = v
                    arg = j
            path[t] = arg
    return path_arr, best
