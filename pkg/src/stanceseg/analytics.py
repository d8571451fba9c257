"""RILE scaling, conservative ensembling and NMF salience trajectories."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, ParseError, StancesegError
from .tagset import LabeledSpan

log = logging.getLogger(__name__)


class UndefinedScoreError(StancesegError, ValueError):
    pass


class ProjectionError(StancesegError, ValueError):
    pass


@dataclass(frozen=True)
class RileGroups:
    right: frozenset[str]
    left: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "right", frozenset(self.right))
        object.__setattr__(self, "left", frozenset(self.left))
        both = self.right & self.left
        if both:
            raise InvalidInputError(f"categories in both RILE groups: {sorted(both)}")


def read_rile_groups(path) -> RileGroups:
    """Parse ``[right]`` / ``[left]`` sections, one category id per line.

    ``#`` starts a comment.
    """
    sections: dict[str, list[str]] = {"right": [], "left": []}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in sections:
                    raise ParseError(f"{path}: unknown section [{current}]", line=lineno)
                continue
            if current is None:
                raise ParseError(f"{path}: category outside a section", line=lineno)
            sections[current].append(line)
    try:
        return RileGroups(frozenset(sections["right"]), frozenset(sections["left"]))
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}") from None


def default_rile_groups() -> RileGroups:
    with resources.as_file(resources.files("stanceseg") / "data" / "rile_groups.txt") as path:
        return read_rile_groups(path)


def count_categories(spans: Iterable[LabeledSpan]) -> Counter:
    return Counter(s.category for s in spans)


def rile(counts: Mapping[str, int], groups: RileGroups) -> float:
    """``(R - L) / N`` with ``N`` every counted statement."""
    total = sum(counts.values())
    if total <= 0:
        raise UndefinedScoreError("RILE is undefined for a unit with no statements")
    r = sum(n for c, n in counts.items() if c in groups.right)
    l = sum(n for c, n in counts.items() if c in groups.left)
    return (r - l) / total


def rile_excluding(counts: Mapping[str, int], groups: RileGroups, excluded: Iterable[str]) -> float:
    excluded = set(excluded)
    return rile({c: n for c, n in counts.items() if c not in excluded}, groups)


def ensemble_agreement(spans: Sequence[LabeledSpan], labels_b: Sequence[str]):
    """Keep the spans whose second label agrees; returns ``(kept, rate)``."""
    if len(spans) != len(labels_b):
        raise InvalidInputError(f"{len(spans)} spans but {len(labels_b)} second labels")
    if not spans:
        return [], 0.0
    kept = [s for s, b in zip(spans, labels_b) if s.category == b]
    return kept, len(kept) / len(spans)


def salience_matrix(units: Sequence[Mapping[str, int]], categories: Sequence[str]):
    """Row-normalized category shares; empty units are dropped.

    Returns ``(matrix, kept_unit_indices)``.
    """
    col = {c: j for j, c in enumerate(categories)}
    rows, kept = [], []
    for i, counts in enumerate(units):
        row = np.zeros(len(categories))
        for c, n in counts.items():
            if n < 0:
                raise InvalidInputError(f"negative count for {c!r} in unit {i}")
            if c in col:
                row[col[c]] += n
        total = row.sum()
        if total <= 0:
            log.warning("unit %d has no statements in the category set; skipped", i)
            continue
        rows.append(row / total)
        kept.append(i)
    return np.asarray(rows).reshape(-1, len(categories)), kept


def _objective(x, w, h) -> float:
    r = x - w @ h
    return float(np.sum(r * r))


def _update_h(x, w, h):
    num = w.T @ x
    den = w.T @ w @ h
    return h * np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _update_w(x, w, h):
    num = x @ h.T
    den = w @ (h @ h.T)
    return w * np.divide(num, den, out=np.zeros_like(num), where=den > 0)


@dataclass
class NmfModel:
    components: np.ndarray  # k x C basis
    iterations: int
    seed: int
    objective: float
    trace: list[float] = field(default_factory=list)


def nmf_fit(x, k: int = 2, iters: int = 500, seed: int = 0, tol: float = 0.0):
    """Multiplicative-update NMF minimizing ``||X - WH||_F^2``.

    Initial factors are uniform random scaled so their product has the
    mean of ``X``.  Stops after ``iters`` sweeps, or earlier once the
    relative objective decrease falls below ``tol``.  Returns
    ``(W, H, trace)`` where ``trace[0]`` is the initial objective.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError("NMF input must be a matrix")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidInputError("NMF input must be finite and non-negative")
    if k < 1 or iters < 1:
        raise InvalidInputError("k and iters must be >= 1")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(x.mean(), np.finfo(float).tiny) / k)
    w = rng.uniform(0.0, 2.0, (x.shape[0], k)) * scale
    h = rng.uniform(0.0, 2.0, (k, x.shape[1])) * scale
    trace = [_objective(x, w, h)]
    for _ in range(iters):
        h = _update_h(x, w, h)
        w = _update_w(x, w, h)
        trace.append(_objective(x, w, h))
        if tol and trace[-2] > 0 and (trace[-2] - trace[-1]) <= tol * trace[-2]:
            break
    return w, h, trace


def fit_salience_model(x, k: int = 2, iters: int = 500, seed: int = 0, tol: float = 0.0):
    w, h, trace = nmf_fit(x, k, iters, seed, tol)
    return NmfModel(h, len(trace) - 1, seed, trace[-1], trace), w


def nmf_project(h, x, tol: float = 1e-10, max_iter: int = 500, normalize: bool = True) -> np.ndarray:
    """Non-negative coordinates of ``x`` (one row or a matrix) on basis ``h``.

    Iterates the W-update with ``h`` frozen until the largest relative
    coordinate change is below ``tol`` or ``max_iter`` sweeps.  With
    ``normalize`` each row is first scaled to sum to one.
    """
    h = np.asarray(h, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != h.shape[1]:
        raise ProjectionError(f"row has {x.shape[1]} categories, basis has {h.shape[1]}")
    if np.any(h < 0) or np.any(x < 0):
        raise ProjectionError("basis and rows must be non-negative")
    if np.any(h.sum(axis=1) <= 0):
        raise ProjectionError("degenerate basis: a component is all zeros")
    if normalize:
        totals = x.sum(axis=1, keepdims=True)
        if np.any(totals <= 0):
            raise ProjectionError("cannot normalize an empty unit")
        x = x / totals
    # start from least squares: a non-negative solution is already the
    # constrained optimum (and a fixed point of the update); rows with
    # negative entries are clipped and iterated from there
    ls = np.linalg.lstsq(h.T, x.T, rcond=None)[0].T
    scale = max(float(np.abs(ls).max()), np.finfo(float).tiny)
    ls[np.abs(ls) <= 1e-12 * scale] = 0.0  # round-off around zero
    w = ls.copy()
    bad = np.any(ls < 0, axis=1)
    if bad.any():
        w[bad] = np.maximum(ls[bad], 1e-6 * scale)
    for _ in range(max_iter):
        new = _update_w(x, w, h)
        change = np.max(np.abs(new - w) / np.maximum(np.abs(w), np.finfo(float).tiny))
        w = new
        if change < tol:
            break
    return w[0] if single else w
