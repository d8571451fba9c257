"""Rule-generated corpora with known gold segmentations.

Each category owns a private word list; a statement draws its words from
its category's list and ends with ``"."``.  ``label_noise`` swaps words
for another category's vocabulary and ``drop_period`` removes sentence
final periods, which blurs statement boundaries.
"""

from __future__ import annotations

import numpy as np

from .corpus import Document
from .tagset import CategoryVocabulary, LabeledSpan

DEFAULT_CATEGORIES = (
    ("104", "Military: Positive"),
    ("202", "Democracy"),
    ("305", "Political Authority"),
    ("504", "Welfare State Expansion"),
    ("000", "Other"),
)
_FILLER = ("the", "we", "and", "our", "will", "for")
_SYLLABLES = ("ka", "lo", "mi", "ru", "te", "va", "zo", "ne", "pi", "su", "do", "fe")


def default_vocabulary(n_categories: int = 5) -> CategoryVocabulary:
    cats = list(DEFAULT_CATEGORIES[:n_categories])
    for i in range(len(cats), n_categories):
        cats.append((f"9{i:02d}", f"Synthetic {i}"))
    return CategoryVocabulary(tuple(cats))


def category_lexicon(vocab: CategoryVocabulary, words_per_category: int = 20) -> dict[str, list[str]]:
    lex = {}
    for ci, cid in enumerate(vocab.ids):
        words = []
        for j in range(words_per_category):
            a = _SYLLABLES[(ci * 7 + j) % len(_SYLLABLES)]
            b = _SYLLABLES[(j * 5 + ci) % len(_SYLLABLES)]
            words.append(f"{a}{b}{ci}x{j}")
        lex[cid] = words
    return lex


def make_corpus(
    n_docs: int,
    vocab: CategoryVocabulary | None = None,
    seed: int = 0,
    statements: tuple[int, int] = (3, 8),
    statement_len: tuple[int, int] = (3, 8),
    filler_rate: float = 0.2,
    label_noise: float = 0.0,
    drop_period: float = 0.0,
    words_per_category: int = 20,
    prefix: str = "doc",
) -> list[Document]:
    vocab = vocab or default_vocabulary()
    lex = category_lexicon(vocab, words_per_category)
    ids = vocab.ids
    rng = np.random.default_rng(seed)
    parties = ("A", "B", "C")
    docs = []
    for d in range(n_docs):
        tokens: list[str] = []
        spans = []
        for _ in range(rng.integers(statements[0], statements[1] + 1)):
            cid = ids[rng.integers(len(ids))]
            start = len(tokens)
            for _ in range(rng.integers(statement_len[0], statement_len[1] + 1)):
                if rng.random() < filler_rate:
                    tokens.append(_FILLER[rng.integers(len(_FILLER))])
                elif label_noise and rng.random() < label_noise:
                    other = ids[rng.integers(len(ids))]
                    tokens.append(lex[other][rng.integers(words_per_category)])
                else:
                    tokens.append(lex[cid][rng.integers(words_per_category)])
            if not (drop_period and rng.random() < drop_period):
                tokens.append(".")
            spans.append(LabeledSpan(start, len(tokens), cid))
        meta = {"party": parties[d % len(parties)], "year": str(2000 + (d // len(parties)) % 10)}
        docs.append(Document(f"{prefix}-{d}", tokens, spans, meta))
    return docs
