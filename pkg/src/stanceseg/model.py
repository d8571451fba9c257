"""The trainable segmenter (hashed emissions + CRF) and its model file.

Model file layout, all integers and floats little-endian::

    b"STANCESEG-MODEL\\n"
    <header: one line of UTF-8 JSON, keys sorted>
    transitions   K*K float64
    start         K   float64
    end           K   float64
    row_ids       R   int64     non-zero emission weight rows
    rows          R*K float64

The header carries ``format_version``, the category vocabulary, the
feature config, ``n_tags`` and ``n_rows`` (R).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .crf import Transitions, constrained_viterbi, viterbi
from .emissions import EmissionModel, FeatureConfig, document_emissions
from .errors import DimensionError, ModelFormatError
from .tagset import (
    CategoryVocabulary,
    LabeledSpan,
    TagVocabulary,
    expand_bio,
    legality_masks,
    tags_to_spans,
)

MAGIC = b"STANCESEG-MODEL\n"
FORMAT_VERSION = 1


@dataclass
class CrfModel:
    tagvocab: TagVocabulary
    emission: EmissionModel
    transitions: Transitions

    def __post_init__(self):
        k = len(self.tagvocab)
        if self.emission.n_tags != k or self.transitions.n_tags != k:
            raise DimensionError(
                "model tag count", expected=k, actual=(self.emission.n_tags, self.transitions.n_tags)
            )

    @classmethod
    def initialize(cls, vocab: CategoryVocabulary, config: FeatureConfig, rng: np.random.Generator, scale=0.1):
        tagvocab = expand_bio(vocab)
        k = len(tagvocab)
        return cls(tagvocab, EmissionModel.zeros(config, k), Transitions.random(k, rng, scale))

    def emissions(self, tokens: Sequence[str], window_size: int = 512) -> np.ndarray:
        return document_emissions(tokens, self.emission, window_size)

    def copy(self) -> "CrfModel":
        tr = self.transitions
        return CrfModel(
            self.tagvocab,
            EmissionModel(self.emission.config, self.emission.weights.copy()),
            Transitions(tr.scores.copy(), tr.start.copy(), tr.end.copy()),
        )


def decode(
    em: np.ndarray,
    transitions: Transitions,
    tagvocab: TagVocabulary,
    legality: bool = True,
    oracle_begins: Sequence[int] | None = None,
) -> list[LabeledSpan]:
    """Decode emissions to spans, optionally with forced statement starts."""
    if oracle_begins is not None:
        tags, _ = constrained_viterbi(em, transitions, oracle_begins, tagvocab)
    else:
        mask = legality_masks(tagvocab, em.shape[0]) if legality else None
        tags, _ = viterbi(em, transitions, mask)
    return tags_to_spans(tagvocab, tags)


def save_model(model: CrfModel, path) -> None:
    weights = model.emission.weights
    row_ids = np.flatnonzero(np.any(weights != 0, axis=1)).astype("<i8")
    header = {
        "format_version": FORMAT_VERSION,
        "categories": [list(c) for c in model.tagvocab.source.categories],
        "feature_config": model.emission.config.to_dict(),
        "n_tags": len(model.tagvocab),
        "n_rows": int(row_ids.size),
    }
    tr = model.transitions
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8") + b"\n")
        for arr in (tr.scores, tr.start, tr.end):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(row_ids.tobytes())
        fh.write(np.ascontiguousarray(weights[row_ids], dtype="<f8").tobytes())


def load_model(path) -> CrfModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise ModelFormatError(f"{path}: not a stanceseg model file")
    nl = data.find(b"\n", len(MAGIC))
    if nl < 0:
        raise ModelFormatError(f"{path}: truncated header")
    try:
        header = json.loads(data[len(MAGIC):nl].decode("utf-8"))
    except ValueError as exc:
        raise ModelFormatError(f"{path}: corrupt header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: unsupported format version {header.get('format_version')} (expected {FORMAT_VERSION})"
        )
    vocab = CategoryVocabulary(tuple(tuple(c) for c in header["categories"]))
    tagvocab = expand_bio(vocab)
    k = int(header["n_tags"])
    if k != len(tagvocab):
        raise ModelFormatError(f"{path}: n_tags {k} inconsistent with {len(vocab)} categories")
    config = FeatureConfig.from_dict(header["feature_config"])
    n_rows = int(header["n_rows"])
    body = memoryview(data)[nl + 1:]
    sizes = [k * k * 8, k * 8, k * 8, n_rows * 8, n_rows * k * 8]
    if len(body) != sum(sizes):
        raise ModelFormatError(f"{path}: payload is {len(body)} bytes, expected {sum(sizes)}")
    parts = []
    pos = 0
    for size in sizes:
        parts.append(body[pos:pos + size])
        pos += size
    scores = np.frombuffer(parts[0], dtype="<f8").reshape(k, k).astype(np.float64)
    start = np.frombuffer(parts[1], dtype="<f8").astype(np.float64)
    end = np.frombuffer(parts[2], dtype="<f8").astype(np.float64)
    row_ids = np.frombuffer(parts[3], dtype="<i8").astype(np.int64)
    if row_ids.size and (row_ids.min() < 0 or row_ids.max() >= config.hash_dim):
        raise ModelFormatError(f"{path}: weight row index out of range")
    weights = np.zeros((config.hash_dim, k))
    weights[row_ids] = np.frombuffer(parts[4], dtype="<f8").reshape(n_rows, k)
    return CrfModel(tagvocab, EmissionModel(config, weights), Transitions(scores, start, end))
