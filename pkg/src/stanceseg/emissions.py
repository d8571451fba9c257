"""Emission score sources: hashed linear features, score files and
overlapping-window stitching."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, InvalidInputError, NonFiniteError, ParseError

CONTEXT = 2
_PAD_LEFT = "<s>"
_PAD_RIGHT = "</s>"


@dataclass(frozen=True)
class FeatureConfig:
    hash_dim: int = 2**20
    ngram_orders: tuple[int, ...] = (1, 2, 3)
    lowercase: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.hash_dim < 1 or self.hash_dim & (self.hash_dim - 1):
            raise InvalidInputError(f"hash_dim must be a power of two, got {self.hash_dim}")
        orders = tuple(sorted(set(int(o) for o in self.ngram_orders)))
        if not orders or orders[0] < 1:
            raise InvalidInputError("ngram_orders must be non-empty positive integers")
        object.__setattr__(self, "ngram_orders", orders)

    def to_dict(self) -> dict:
        return {
            "hash_dim": self.hash_dim,
            "ngram_orders": list(self.ngram_orders),
            "lowercase": self.lowercase,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(int(d["hash_dim"]), tuple(d["ngram_orders"]), bool(d["lowercase"]), int(d["seed"]))


class FeatureBatch(NamedTuple):
    """Hashed features of a token sequence in CSR layout.

    ``indices[offsets[t]:offsets[t+1]]`` are the active feature rows of
    token ``t``; every token has at least the bias feature.
    """

    indices: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    def token_ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), np.diff(self.offsets))


def _token_strings(token: str, orders) -> list[str]:
    feats = [f"w={token}"]
    padded = f"^{token}$"
    for n in orders:
        for i in range(len(padded) - n + 1):
            feats.append(f"c{n}={padded[i:i + n]}")
    return feats


def feature_strings(tokens: Sequence[str], config: FeatureConfig) -> list[list[str]]:
    """Un-hashed feature names for each token, context window of two."""
    toks = [t.lower() if config.lowercase else t for t in tokens]
    n = len(toks)
    out = []
    for t, tok in enumerate(toks):
        feats = ["bias"]
        feats.extend(_token_strings(tok, config.ngram_orders))
        for off in range(-CONTEXT, CONTEXT + 1):
            if off == 0:
                continue
            j = t + off
            word = toks[j] if 0 <= j < n else (_PAD_LEFT if j < 0 else _PAD_RIGHT)
            feats.append(f"w[{off:+d}]={word}")
        prev = toks[t - 1] if t > 0 else _PAD_LEFT
        feats.append(f"w[-1:0]={prev}|{tok}")
        out.append(feats)
    return out


def featurize(tokens: Sequence[str], config: FeatureConfig) -> FeatureBatch:
    if len(tokens) == 0:
        raise InvalidInputError("cannot featurize an empty token list")
    mask = config.hash_dim - 1
    seed = config.seed & 0xFFFFFFFF
    indices = []
    offsets = [0]
    for feats in feature_strings(tokens, config):
        rows = sorted({zlib.crc32(f.encode("utf-8"), seed) & mask for f in feats})
        indices.extend(rows)
        offsets.append(len(indices))
    return FeatureBatch(np.asarray(indices, dtype=np.int64), np.asarray(offsets, dtype=np.int64))


@dataclass
class EmissionModel:
    """Linear map from hashed features to per-tag scores."""

    config: FeatureConfig
    weights: np.ndarray  # hash_dim x K

    def __post_init__(self):
        if self.weights.shape[0] != self.config.hash_dim:
            raise DimensionError("weight rows", expected=self.config.hash_dim, actual=self.weights.shape[0])

    @classmethod
    def zeros(cls, config: FeatureConfig, n_tags: int) -> "EmissionModel":
        return cls(config, np.zeros((config.hash_dim, n_tags)))

    @property
    def n_tags(self) -> int:
        return self.weights.shape[1]


def linear_emissions(features: FeatureBatch, model: EmissionModel) -> np.ndarray:
    rows = model.weights[features.indices]
    return np.add.reduceat(rows, features.offsets[:-1], axis=0)


class Window(NamedTuple):
    start: int
    end: int
    select_start: int
    select_end: int


@dataclass(frozen=True)
class WindowPlan:
    n_tokens: int
    window_size: int
    stride: int
    windows: tuple[Window, ...]


def plan_windows(n_tokens: int, window_size: int = 512) -> WindowPlan:
    """Windows of ``window_size`` starting every ``window_size // 2`` tokens.

    Each window contributes its central half ``[start + W/4, start + 3W/4)``;
    the first window also keeps its head and the last its tail, so the
    selected slices partition ``[0, n_tokens)``.
    """
    if window_size < 2 or window_size % 2:
        raise InvalidInputError(f"window size must be even and >= 2, got {window_size}")
    if n_tokens < 1:
        raise InvalidInputError("n_tokens must be >= 1")
    stride = window_size // 2
    quarter = window_size // 4
    if n_tokens <= window_size:
        count = 1
    else:
        count = math.ceil((n_tokens - window_size) / stride) + 1
    windows = []
    for i in range(count):
        start = i * stride
        end = min(start + window_size, n_tokens)
        sel_start = 0 if i == 0 else start + quarter
        sel_end = n_tokens if i == count - 1 else start + stride + quarter
        windows.append(Window(start, end, sel_start, sel_end))
    return WindowPlan(n_tokens, window_size, stride, tuple(windows))


def stitch_windows(per_window: Sequence[np.ndarray], plan: WindowPlan) -> np.ndarray:
    if len(per_window) != len(plan.windows):
        raise DimensionError("window count", expected=len(plan.windows), actual=len(per_window))
    k = None
    for i, (scores, w) in enumerate(zip(per_window, plan.windows)):
        scores = np.asarray(scores)
        if scores.ndim != 2 or scores.shape[0] != w.end - w.start:
            raise DimensionError(f"window {i} rows", expected=w.end - w.start, actual=scores.shape)
        if k is None:
            k = scores.shape[1]
        elif scores.shape[1] != k:
            raise DimensionError(f"window {i} columns", expected=k, actual=scores.shape[1])
    out = np.empty((plan.n_tokens, k), dtype=np.result_type(*per_window))
    for scores, w in zip(per_window, plan.windows):
        out[w.select_start:w.select_end] = np.asarray(scores)[w.select_start - w.start:w.select_end - w.start]
    return out


def windowed_emissions(
    tokens: Sequence[str], score_window: Callable[[Sequence[str]], np.ndarray], window_size: int = 512
) -> np.ndarray:
    """Score each window independently and stitch the central slices."""
    plan = plan_windows(len(tokens), window_size)
    return stitch_windows([score_window(tokens[w.start:w.end]) for w in plan.windows], plan)


def document_emissions(tokens: Sequence[str], model: EmissionModel, window_size: int = 512) -> np.ndarray:
    return windowed_emissions(
        tokens, lambda chunk: linear_emissions(featurize(chunk, model.config), model), window_size
    )


def save_emissions(em: np.ndarray, path) -> None:
    em = np.asarray(em, dtype=np.float64)
    if em.ndim != 2:
        raise InvalidInputError("emission matrix must be two-dimensional")
    lines = [f"{em.shape[0]} {em.shape[1]}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in em)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_emissions(path, n_tags: int | None = None, n_tokens: int | None = None) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"emission file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(f"{path}: header must be 'T K'", line=1)
        try:
            t_rows, k_cols = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(f"{path}: header must hold two integers", line=1) from None
        if n_tags is not None and k_cols != n_tags:
            raise DimensionError(f"{path}: tag count", expected=n_tags, actual=k_cols)
        if n_tokens is not None and t_rows != n_tokens:
            raise DimensionError(f"{path}: token count", expected=n_tokens, actual=t_rows)
        em = np.empty((t_rows, k_cols))
        row = 0
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            if row >= t_rows:
                raise DimensionError(f"{path}: row count", expected=t_rows, actual=f">{t_rows}")
            fields = line.split()
            if len(fields) != k_cols:
                raise DimensionError(f"{path}: columns on line {lineno}", expected=k_cols, actual=len(fields))
            try:
                em[row] = [float(x) for x in fields]
            except ValueError:
                raise ParseError(f"{path}: non-numeric value", line=lineno) from None
            bad = np.flatnonzero(~np.isfinite(em[row]))
            if bad.size:
                raise NonFiniteError(f"{path}: non-finite emission", position=(row, int(bad[0])))
            row += 1
    if row != t_rows:
        raise DimensionError(f"{path}: row count", expected=t_rows, actual=row)
    return em
