"""Exact-match span scoring and rank correlation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .tagset import LabeledSpan

MODES = ("micro", "macro_by_doc", "support_weighted")


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float


def _prf(matched: int, n_pred: int, n_gold: int) -> PRF:
    p = matched / n_pred if n_pred else 0.0
    r = matched / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f)


def match_spans(gold: Sequence[LabeledSpan], pred: Sequence[LabeledSpan]) -> list[tuple[int, int]]:
    """Index pairs ``(gold_i, pred_j)`` with identical start, end and category."""
    index = {}
    for i, s in enumerate(gold):
        index.setdefault(tuple(s), []).append(i)
    pairs = []
    for j, s in enumerate(pred):
        free = index.get(tuple(s))
        if free:
            pairs.append((free.pop(0), j))
    return pairs


@dataclass
class EvalReport:
    gold_support: Counter = field(default_factory=Counter)
    predicted: Counter = field(default_factory=Counter)
    matched: Counter = field(default_factory=Counter)
    doc_scores: list[PRF] = field(default_factory=list)

    @property
    def n_gold(self) -> int:
        return sum(self.gold_support.values())

    @property
    def n_pred(self) -> int:
        return sum(self.predicted.values())

    @property
    def n_matched(self) -> int:
        return sum(self.matched.values())

    @property
    def micro(self) -> PRF:
        return _prf(self.n_matched, self.n_pred, self.n_gold)

    @property
    def macro_by_doc(self) -> PRF:
        scores = np.asarray(self.doc_scores, dtype=float).reshape(-1, 3)
        return PRF(*(float(x) for x in scores.mean(axis=0)))

    def per_category(self) -> dict[str, PRF]:
        cats = sorted(set(self.gold_support) | set(self.predicted))
        return {c: _prf(self.matched[c], self.predicted[c], self.gold_support[c]) for c in cats}

    @property
    def support_weighted(self) -> PRF:
        # categories without gold support carry zero weight
        total = self.n_gold
        per_cat = self.per_category()
        acc = np.zeros(3)
        for c, support in self.gold_support.items():
            if support:
                acc += support * np.asarray(per_cat[c])
        return PRF(*(float(x) for x in acc / total))

    def score(self, mode: str) -> PRF:
        if mode not in MODES:
            raise InvalidInputError(f"unknown averaging mode {mode!r}; choose from {MODES}")
        return getattr(self, mode)

    def records(self) -> list[dict]:
        out = []
        for mode in MODES:
            p, r, f = self.score(mode)
            out.append({"mode": mode, "precision": p, "recall": r, "f1": f})
        for c, (p, r, f) in self.per_category().items():
            out.append(
                {
                    "category": c,
                    "gold": self.gold_support[c],
                    "predicted": self.predicted[c],
                    "matched": self.matched[c],
                    "precision": p,
                    "recall": r,
                    "f1": f,
                }
            )
        return out

    def format_table(self) -> str:
        lines = [f"{'mode':<18}{'P':>8}{'R':>8}{'F1':>8}"]
        for mode in MODES:
            p, r, f = self.score(mode)
            lines.append(f"{mode:<18}{p:8.4f}{r:8.4f}{f:8.4f}")
        lines.append("")
        lines.append(f"{'category':<18}{'gold':>7}{'pred':>7}{'match':>7}{'F1':>8}")
        for c, prf in self.per_category().items():
            lines.append(
                f"{c:<18}{self.gold_support[c]:7d}{self.predicted[c]:7d}{self.matched[c]:7d}{prf.f1:8.4f}"
            )
        return "\n".join(lines)


def evaluate(gold_docs: Sequence[Sequence[LabeledSpan]], pred_docs: Sequence[Sequence[LabeledSpan]]) -> EvalReport:
    """Tally exact matches over aligned per-document span lists."""
    if len(gold_docs) != len(pred_docs):
        raise InvalidInputError(f"{len(gold_docs)} gold documents vs {len(pred_docs)} predicted")
    report = EvalReport()
    for gold, pred in zip(gold_docs, pred_docs):
        pairs = match_spans(gold, pred)
        g = Counter(s[2] for s in gold)
        p = Counter(s[2] for s in pred)
        m = Counter(gold[i][2] for i, _ in pairs)
        report.gold_support.update(g)
        report.predicted.update(p)
        report.matched.update(m)
        report.doc_scores.append(_prf(len(pairs), len(pred), len(gold)))
    if report.n_gold == 0:
        raise UndefinedMetricError("gold corpus contains no spans")
    return report


def prf(gold_docs, pred_docs, mode: str = "micro") -> PRF:
    return evaluate(gold_docs, pred_docs).score(mode)


def average_ranks(xs: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    xs = np.asarray(xs, dtype=float)
    order = np.argsort(xs, kind="mergesort")
    ranks = np.empty(len(xs))
    sorted_x = xs[order]
    i = 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise InvalidInputError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise UndefinedMetricError("spearman needs at least two observations")
    rx, ry = average_ranks(xs), average_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0:
        raise UndefinedMetricError("spearman is undefined for constant input")
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))
