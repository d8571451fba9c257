"""Documents, tokenization and the line-delimited corpus format.

One JSON object per line::

    {"id": "dk-1998-a", "party": "SD", "year": "1998", "country": "DK",
     "tokens": ["We", "want", "..."], "spans": [[0, 12, "504"], ...]}

``spans`` is optional; when present it must tile the token list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import CoverageError, ParseError
from .tagset import CategoryVocabulary, LabeledSpan, check_cover

META_KEYS = ("party", "year", "country")
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Default whitespace-and-punctuation tokenizer."""
    return _TOKEN_RE.findall(text)


@dataclass
class Document:
    id: str
    tokens: list[str]
    spans: list[LabeledSpan] | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.tokens)

    def with_spans(self, spans: Sequence[LabeledSpan]) -> "Document":
        return Document(self.id, list(self.tokens), [LabeledSpan(*s) for s in spans], dict(self.meta))

    def to_record(self) -> dict:
        rec = {"id": self.id}
        for key in META_KEYS:
            if key in self.meta:
                rec[key] = self.meta[key]
        rec["tokens"] = list(self.tokens)
        if self.spans is not None:
            rec["spans"] = [[s.start, s.end, s.category] for s in self.spans]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "Document":
        if not isinstance(rec, dict):
            raise ValueError("record must be a JSON object")
        if "id" not in rec or "tokens" not in rec:
            raise ValueError("record needs 'id' and 'tokens'")
        tokens = rec["tokens"]
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise ValueError("'tokens' must be a list of strings")
        spans = None
        if rec.get("spans") is not None:
            spans = []
            for item in rec["spans"]:
                if not isinstance(item, (list, tuple)) or len(item) != 3:
                    raise ValueError(f"span {item!r} must be [start, end, category]")
                spans.append(LabeledSpan(int(item[0]), int(item[1]), str(item[2])))
        meta = {k: str(rec[k]) for k in META_KEYS if rec.get(k) is not None}
        return cls(str(rec["id"]), list(tokens), spans, meta)


def validate_document(doc: Document, vocab: CategoryVocabulary | None = None) -> None:
    if doc.spans is None:
        return
    check_cover(len(doc.tokens), doc.spans)
    if vocab is not None:
        for s in doc.spans:
            if s.category not in vocab:
                raise CoverageError(f"unknown category {s.category!r}", s.start)


def read_corpus(path, vocab: CategoryVocabulary | None = None, require_spans: bool = False) -> list[Document]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    docs = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = Document.from_record(json.loads(line))
                if require_spans and doc.spans is None:
                    raise ValueError(f"document {doc.id!r} has no spans")
                validate_document(doc, vocab)
            except (ValueError, CoverageError) as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            docs.append(doc)
    return docs


def write_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_record(), ensure_ascii=False) + "\n")


def corpus_vocabulary(docs: Iterable[Document]) -> CategoryVocabulary:
    """Categories in order of first appearance."""
    seen = {}
    for doc in docs:
        for s in doc.spans or ():
            seen.setdefault(s.category, None)
    return CategoryVocabulary.from_ids(seen)
