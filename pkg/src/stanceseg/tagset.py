"""Category vocabularies, BIO expansion and span/tag conversion.

Tag layout for ``n`` categories: index 0 is ``O``; category ``i`` owns
``B`` at ``1 + 2*i`` and ``I`` at ``2 + 2*i``.  Statements form a total
cover of a document, so ``O`` is never emitted on a real token.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import CoverageError, InvalidInputError, ParseError

O_TAG = 0


@dataclass(frozen=True)
class CategoryVocabulary:
    """Ordered category ids with display names."""

    categories: tuple[tuple[str, str], ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cats = tuple((str(cid), str(name)) for cid, name in self.categories)
        index = {}
        for i, (cid, _) in enumerate(cats):
            if not cid:
                raise InvalidInputError("category id must be non-empty")
            if cid in index:
                raise InvalidInputError(f"duplicate category id {cid!r}")
            index[cid] = i
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_ids(cls, ids: Iterable[str]) -> "CategoryVocabulary":
        return cls(tuple((i, i) for i in ids))

    def __len__(self):
        return len(self.categories)

    def __contains__(self, cid):
        return cid in self._index

    def __iter__(self):
        return iter(self.ids)

    @property
    def ids(self) -> list[str]:
        return [cid for cid, _ in self.categories]

    @property
    def names(self) -> list[str]:
        return [name for _, name in self.categories]

    def index(self, cid: str) -> int:
        try:
            return self._index[cid]
        except KeyError:
            raise InvalidInputError(f"unknown category {cid!r}") from None

    def name_of(self, cid: str) -> str:
        return self.categories[self.index(cid)][1]


def read_vocabulary(path) -> CategoryVocabulary:
    """Read ``id<TAB>display_name`` lines; a bare id doubles as its name."""
    cats = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cid, sep, name = line.partition("\t")
            cid = cid.strip()
            if not cid:
                raise ParseError("empty category id", line=lineno)
            cats.append((cid, name if sep else cid))
    try:
        return CategoryVocabulary(tuple(cats))
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_vocabulary(vocab: CategoryVocabulary, path) -> None:
    Path(path).write_text(
        "".join(f"{cid}\t{name}\n" for cid, name in vocab.categories), encoding="utf-8"
    )


@dataclass(frozen=True)
class TagVocabulary:
    source: CategoryVocabulary
    tags: tuple[str, ...]

    def __len__(self):
        return len(self.tags)

    @property
    def n_categories(self) -> int:
        return len(self.source)

    def begin(self, cid: str) -> int:
        return 1 + 2 * self.source.index(cid)

    def inside(self, cid: str) -> int:
        return 2 + 2 * self.source.index(cid)

    def category_of(self, tag: int) -> str | None:
        if tag == O_TAG:
            return None
        return self.source.ids[(tag - 1) // 2]

    @staticmethod
    def is_begin(tag: int) -> bool:
        return tag > 0 and tag % 2 == 1

    @staticmethod
    def is_inside(tag: int) -> bool:
        return tag > 0 and tag % 2 == 0

    @property
    def begin_tags(self) -> np.ndarray:
        return np.arange(1, len(self.tags), 2)

    @property
    def inside_tags(self) -> np.ndarray:
        return np.arange(2, len(self.tags), 2)


class LabeledSpan(NamedTuple):
    start: int
    end: int
    category: str


class LegalityMask(NamedTuple):
    """Boolean allow-masks: ``positions`` is T x K, ``transitions`` K x K."""

    positions: np.ndarray
    transitions: np.ndarray


def expand_bio(vocab: CategoryVocabulary) -> TagVocabulary:
    if len(vocab) == 0:
        raise InvalidInputError("cannot expand an empty category vocabulary")
    tags = ["O"]
    for cid in vocab.ids:
        tags.append(f"B-{cid}")
        tags.append(f"I-{cid}")
    return TagVocabulary(vocab, tuple(tags))


def check_cover(n_tokens: int, spans: Sequence[LabeledSpan]) -> None:
    """Raise :class:`CoverageError` unless ``spans`` tile ``[0, n_tokens)``."""
    pos = 0
    for span in spans:
        start, end = span[0], span[1]
        if start > pos:
            raise CoverageError("gap before span", pos)
        if start < pos:
            raise CoverageError("overlapping span", start)
        if end <= start:
            raise CoverageError("empty span", start)
        if end > n_tokens:
            raise CoverageError("span past end of document", n_tokens)
        pos = end
    if pos != n_tokens:
        raise CoverageError("spans do not reach end of document", pos)


def spans_to_tags(tagvocab: TagVocabulary, n_tokens: int, spans: Sequence[LabeledSpan]) -> list[int]:
    check_cover(n_tokens, spans)
    tags = []
    for start, end, cid in spans:
        tags.append(tagvocab.begin(cid))
        tags.extend([tagvocab.inside(cid)] * (end - start - 1))
    return tags


def tags_to_spans(tagvocab: TagVocabulary, tags: Sequence[int]) -> list[LabeledSpan]:
    """Decode a tag sequence into a total cover, repairing invalid input.

    An ``I-c`` with no open ``c`` span starts a new span.  An ``O`` token is
    absorbed into the open span and closes it; leading ``O`` tokens join the
    first labelled span.  An all-``O`` sequence becomes one span of the
    first category.
    """
    n = len(tags)
    if n == 0:
        return []
    out: list[list] = []
    open_cat = None
    pending = 0  # leading O tokens not yet covered
    for t, tag in enumerate(int(x) for x in tags):
        if tag == O_TAG:
            if out:
                out[-1][1] = t + 1
            else:
                pending += 1
            open_cat = None
            continue
        cid = tagvocab.category_of(tag)
        if TagVocabulary.is_inside(tag) and open_cat == cid:
            out[-1][1] = t + 1
            continue
        out.append([t, t + 1, cid])
        open_cat = cid
    if not out:
        return [LabeledSpan(0, n, tagvocab.source.ids[0])]
    if pending:
        out[0][0] = 0
    return [LabeledSpan(s, e, c) for s, e, c in out]


def legality_masks(tagvocab: TagVocabulary, n_tokens: int) -> LegalityMask:
    """Structural BIO masks for a document of ``n_tokens`` tokens.

    ``O`` is excluded everywhere and ``I`` tags are excluded at position 0,
    so every surviving path decodes to a total cover without repair.
    """
    if n_tokens < 1:
        raise InvalidInputError("n_tokens must be >= 1")
    k = len(tagvocab)
    positions = np.ones((n_tokens, k), dtype=bool)
    positions[:, O_TAG] = False
    positions[0, tagvocab.inside_tags] = False
    transitions = np.ones((k, k), dtype=bool)
    for b, i in zip(tagvocab.begin_tags, tagvocab.inside_tags):
        transitions[:, i] = False
        transitions[b, i] = True
        transitions[i, i] = True
    return LegalityMask(positions, transitions)


def oracle_masks(tagvocab: TagVocabulary, n_tokens: int, begin_positions: Iterable[int]) -> LegalityMask:
    """Masks forcing a ``B`` tag exactly at ``begin_positions``."""
    begins = sorted(set(int(p) for p in begin_positions))
    if not begins or begins[0] != 0:
        raise InvalidInputError("boundary oracle must contain position 0")
    if begins[-1] >= n_tokens or begins[0] < 0:
        raise InvalidInputError(f"boundary oracle position out of range for {n_tokens} tokens")
    base = legality_masks(tagvocab, n_tokens)
    positions = np.zeros_like(base.positions)
    positions[:, tagvocab.inside_tags] = True
    positions[begins, :] = False
    positions[np.ix_(begins, tagvocab.begin_tags)] = True
    return LegalityMask(positions, base.transitions)


def span_begins(spans: Sequence[LabeledSpan]) -> list[int]:
    return [s.start for s in spans]
