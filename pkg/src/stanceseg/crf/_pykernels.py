"""Reference numpy implementation of the CRF dynamic programs.

Used when the compiled ``_ckernels`` extension is unavailable.  All
arrays are float64; ``-inf`` entries mark masked tags or transitions.
"""

import numpy as np


def _logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def forward(em, trans, start, end):
    n, k = em.shape
    alpha = np.empty((n, k))
    alpha[0] = start + em[0]
    for t in range(1, n):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + em[t]
    log_z = float(_logsumexp(alpha[n - 1] + end, axis=0))
    return alpha, log_z


def backward(em, trans, end):
    n, k = em.shape
    beta = np.empty((n, k))
    beta[n - 1] = end
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(trans + (em[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def pair_marginal_sum(em, trans, alpha, beta, log_z):
    n, k = em.shape
    total = np.zeros((k, k))
    with np.errstate(invalid="ignore"):
        for t in range(n - 1):
            s = alpha[t][:, None] + trans + (em[t + 1] + beta[t + 1])[None, :] - log_z
            total += np.exp(s)
    return total


def viterbi(em, trans, start, end):
    """Max-score path; ties go to the lowest tag at the earliest position.

    Suffix maxima are computed right to left, then the path is read off
    left to right taking the first argmax at each step.
    """
    n, k = em.shape
    best_suffix = np.empty((n, k))
    best_suffix[n - 1] = em[n - 1] + end
    for t in range(n - 2, -1, -1):
        best_suffix[t] = em[t] + np.max(trans + best_suffix[t + 1][None, :], axis=1)
    path = np.empty(n, dtype=np.int64)
    first = start + best_suffix[0]
    path[0] = int(np.argmax(first))
    score = float(first[path[0]])
    for t in range(1, n):
        path[t] = int(np.argmax(trans[path[t - 1]] + best_suffix[t]))
    return path, score
