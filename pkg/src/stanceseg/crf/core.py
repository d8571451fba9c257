"""Exact inference for a first-order linear-chain CRF.

A path ``y`` over ``T`` tokens scores

    start[y0] + sum_t em[t, y_t] + sum_t trans[y_t, y_t+1] + end[y_T-1]

Masks are applied as ``-inf`` overlays on copies of the inputs; stored
parameters are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ..errors import DimensionError, InfeasibleError, InvalidInputError
from ..tagset import LegalityMask, TagVocabulary, oracle_masks
from . import _backend


@dataclass(frozen=True)
class Transitions:
    """Tag-transition scores plus start and end vectors."""

    scores: np.ndarray
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        for name in ("scores", "start", "end"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        k = self.scores.shape[0]
        if self.scores.shape != (k, k) or self.start.shape != (k,) or self.end.shape != (k,):
            raise DimensionError(
                "inconsistent transition shapes",
                expected=f"({k},{k}), ({k},), ({k},)",
                actual=f"{self.scores.shape}, {self.start.shape}, {self.end.shape}",
            )

    @property
    def n_tags(self) -> int:
        return self.scores.shape[0]

    @classmethod
    def zeros(cls, k: int) -> "Transitions":
        return cls(np.zeros((k, k)), np.zeros(k), np.zeros(k))

    @classmethod
    def random(cls, k: int, rng: np.random.Generator, scale: float = 0.1) -> "Transitions":
        return cls(
            rng.uniform(-scale, scale, (k, k)),
            rng.uniform(-scale, scale, k),
            rng.uniform(-scale, scale, k),
        )


class TransitionGrads(NamedTuple):
    scores: np.ndarray
    start: np.ndarray
    end: np.ndarray


def _check(em, tr: Transitions):
    em = np.ascontiguousarray(em, dtype=np.float64)
    if em.ndim != 2 or em.shape[0] < 1:
        raise InvalidInputError(f"emission matrix must be T x K with T >= 1, got shape {em.shape}")
    if em.shape[1] != tr.n_tags:
        raise DimensionError("emission/transition tag count mismatch", expected=tr.n_tags, actual=em.shape[1])
    return em


def _apply_mask(em, tr: Transitions, mask: LegalityMask | None):
    if mask is None:
        return em, tr.scores, tr.start, tr.end
    positions = np.asarray(mask.positions, dtype=bool)
    transitions = np.asarray(mask.transitions, dtype=bool)
    if positions.shape != em.shape or transitions.shape != tr.scores.shape:
        raise DimensionError(
            "mask shape mismatch",
            expected=f"{em.shape} and {tr.scores.shape}",
            actual=f"{positions.shape} and {transitions.shape}",
        )
    em = np.where(positions, em, -np.inf)
    trans = np.where(transitions, tr.scores, -np.inf)
    return em, trans, tr.start, tr.end


def score_sequence(em, tr: Transitions, tags: Sequence[int]) -> float:
    em = _check(em, tr)
    tags = np.asarray(tags, dtype=np.int64)
    if tags.shape != (em.shape[0],):
        raise InvalidInputError(f"tag sequence length {tags.shape[0] if tags.ndim else 0} != {em.shape[0]} tokens")
    score = tr.start[tags[0]] + em[np.arange(len(tags)), tags].sum() + tr.end[tags[-1]]
    if len(tags) > 1:
        score += tr.scores[tags[:-1], tags[1:]].sum()
    return float(score)


def log_partition(em, tr: Transitions, mask: LegalityMask | None = None) -> float:
    em = _check(em, tr)
    em_m, trans, start, end = _apply_mask(em, tr, mask)
    _, log_z = _backend.kernels.forward(em_m, trans, start, end)
    if log_z == -np.inf:
        raise InfeasibleError("no tag path survives the mask")
    return float(log_z)


def nll(em, tr: Transitions, gold: Sequence[int], mask: LegalityMask | None = None) -> float:
    return log_partition(em, tr, mask) - score_sequence(em, tr, gold)


def marginals(em, tr: Transitions, mask: LegalityMask | None = None):
    """Return ``(unary T x K, summed pairwise K x K, log_z)`` posteriors."""
    em = _check(em, tr)
    em_m, trans, start, end = _apply_mask(em, tr, mask)
    k = _backend.kernels
    alpha, log_z = k.forward(em_m, trans, start, end)
    if log_z == -np.inf:
        raise InfeasibleError("no tag path survives the mask")
    beta = k.backward(em_m, trans, end)
    with np.errstate(invalid="ignore"):
        unary = np.exp(alpha + beta - log_z)
    unary = np.nan_to_num(unary, nan=0.0)
    pair = k.pair_marginal_sum(em_m, trans, alpha, beta, log_z)
    return unary, pair, float(log_z)


def nll_gradients(em, tr: Transitions, gold: Sequence[int], mask: LegalityMask | None = None):
    """Gradients of :func:`nll`: expected minus observed feature counts.

    Returns ``(d_em, TransitionGrads, nll_value)``.
    """
    em = _check(em, tr)
    gold = np.asarray(gold, dtype=np.int64)
    n, k = em.shape
    if gold.shape != (n,):
        raise InvalidInputError(f"gold length {gold.shape} != {n} tokens")
    unary, pair, log_z = marginals(em, tr, mask)
    d_em = unary.copy()
    d_em[np.arange(n), gold] -= 1.0
    d_trans = pair
    if n > 1:
        np.add.at(d_trans, (gold[:-1], gold[1:]), -1.0)
    d_start = unary[0].copy()
    d_start[gold[0]] -= 1.0
    d_end = unary[n - 1].copy()
    d_end[gold[-1]] -= 1.0
    value = log_z - score_sequence(em, tr, gold)
    return d_em, TransitionGrads(d_trans, d_start, d_end), value


def viterbi(em, tr: Transitions, mask: LegalityMask | None = None) -> tuple[list[int], float]:
    """Best path and its score; ties resolve to the lexicographically
    smallest tag sequence."""
    em = _check(em, tr)
    em_m, trans, start, end = _apply_mask(em, tr, mask)
    path, best = _backend.kernels.viterbi(em_m, trans, start, end)
    if best == -np.inf:
        raise InfeasibleError("no tag path survives the mask")
    path = [int(x) for x in path]
    return path, score_sequence(em, tr, path)


def constrained_viterbi(
    em, tr: Transitions, begin_positions: Iterable[int], tagvocab: TagVocabulary
) -> tuple[list[int], float]:
    """Viterbi restricted to paths whose statement starts are exactly
    ``begin_positions``."""
    em = _check(em, tr)
    mask = oracle_masks(tagvocab, em.shape[0], begin_positions)
    return viterbi(em, tr, mask)

