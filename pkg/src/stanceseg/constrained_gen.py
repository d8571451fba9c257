"""Parrot-or-tag constrained decoding.

A generator segments and labels an input by copying it token by token and
inserting a label tag `` [(Display Name)]`` after every statement.  At each
step the legal next tokens are: the next input token; the first token of
a tag (only once at least one input token has been copied since the last
tag); or, inside a tag, the children of the current trie node.  After
the input is exhausted and the last tag is closed, only end-of-sequence
is legal.  Legal outputs map one-to-one onto segmentations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Protocol, Sequence

from .corpus import tokenize as default_tokenize
from .errors import InvalidInputError, ParseError
from .tagset import CategoryVocabulary, LabeledSpan

EOS = "</s>"


def tag_text(display_name: str) -> str:
    return f" [({display_name})]"


@dataclass
class TrieNode:
    children: dict[str, "TrieNode"] = field(default_factory=dict)
    category: str | None = None


class TokenTrie:
    """Prefix tree over the tokenized tag strings of every category."""

    def __init__(self, vocab: CategoryVocabulary, tokenizer: Callable[[str], list[str]] = default_tokenize):
        names = vocab.names
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise InvalidInputError(f"duplicate display name {dup!r}")
        self.root = TrieNode()
        self.tokenizer = tokenizer
        self.paths: dict[str, tuple[str, ...]] = {}
        for cid, name in vocab.categories:
            path = tuple(tokenizer(tag_text(name)))
            if not path:
                raise InvalidInputError(f"tag for {cid!r} tokenizes to nothing")
            node = self.root
            for tok in path:
                if node.category is not None:
                    raise InvalidInputError(f"tag of {node.category!r} is a prefix of the tag of {cid!r}")
                node = node.children.setdefault(tok, TrieNode())
            if node.category is not None:
                raise InvalidInputError(f"categories {node.category!r} and {cid!r} tokenize identically")
            if node.children:
                raise InvalidInputError(f"tag of {cid!r} is a prefix of another tag")
            node.category = cid
            self.paths[cid] = path

    @property
    def start_tokens(self) -> list[str]:
        return list(self.root.children)

    def accepts(self, tokens: Sequence[str]) -> str | None:
        """Category whose tag is exactly ``tokens``, else ``None``."""
        node = self.root
        for tok in tokens:
            node = node.children.get(tok)
            if node is None:
                return None
        return node.category


class DecodeState(NamedTuple):
    cursor: int  # next input token to copy
    node: TrieNode | None  # current trie node while inside a tag
    since_tag: int  # input tokens copied since the last closed tag
    finished: bool = False


INITIAL_STATE = DecodeState(0, None, 0)


def successors(state: DecodeState, trie: TokenTrie, tokens: Sequence[str]) -> list[tuple[str, DecodeState, str | None]]:
    """Legal ``(token, next_state, closed_category)`` moves from ``state``.

    A token can appear twice when an input token coincides with a tag
    token; each reading is a separate move.
    """
    if state.finished:
        return []
    moves = []
    if state.node is not None:
        for tok, child in state.node.children.items():
            if child.category is not None:
                moves.append((tok, DecodeState(state.cursor, None, 0), child.category))
            else:
                moves.append((tok, DecodeState(state.cursor, child, 0), None))
        return moves
    if state.cursor < len(tokens):
        moves.append((tokens[state.cursor], DecodeState(state.cursor + 1, None, state.since_tag + 1), None))
    if state.since_tag >= 1:
        for tok, child in trie.root.children.items():
            if child.category is not None:
                moves.append((tok, DecodeState(state.cursor, None, 0), child.category))
            else:
                moves.append((tok, DecodeState(state.cursor, child, 0), None))
    if state.cursor == len(tokens) and state.since_tag == 0 and state.cursor > 0:
        moves.append((EOS, state._replace(finished=True), None))
    return moves


def legal_continuations(state: DecodeState, trie: TokenTrie, tokens: Sequence[str]) -> set[str]:
    return {tok for tok, _, _ in successors(state, trie, tokens)}


def generate(spans: Sequence[LabeledSpan], tokens: Sequence[str], trie: TokenTrie, eos: bool = True) -> list[str]:
    """The unique emission sequence encoding ``spans``."""
    out: list[str] = []
    pos = 0
    for start, end, cid in spans:
        if start != pos or end <= start:
            raise InvalidInputError(f"spans must tile the input; bad span at {start}")
        out.extend(tokens[start:end])
        out.extend(trie.paths[cid])
        pos = end
    if pos != len(tokens):
        raise InvalidInputError("spans do not reach end of input")
    if eos:
        out.append(EOS)
    return out


def parse_tagged_output(emitted: Sequence[str], trie: TokenTrie, tokens: Sequence[str]) -> list[LabeledSpan]:
    """Recover the segmentation encoded by an emission sequence.

    A trailing end-of-sequence marker is optional.  Where an input token
    coincides with a tag token, the copy reading is tried first.
    """
    emitted = list(emitted)
    if emitted and emitted[-1] == EOS:
        emitted = emitted[:-1]
    if not tokens:
        raise ParseError("input is empty")
    furthest = [0, 0]  # emitted index, input position of deepest failure

    def walk(i, state, spans, seg_start):
        if i == len(emitted):
            if state.node is None and state.cursor == len(tokens) and state.since_tag == 0:
                return spans
            return None
        tok = emitted[i]
        for move_tok, nxt, closed in successors(state, trie, tokens):
            if move_tok != tok or move_tok == EOS:
                continue
            if closed is not None:
                res = walk(i + 1, nxt, spans + [LabeledSpan(seg_start, nxt.cursor, closed)], nxt.cursor)
            else:
                res = walk(i + 1, nxt, spans, seg_start)
            if res is not None:
                return res
        if i >= furthest[0]:
            furthest[0], furthest[1] = i, state.cursor
        return None

    result = walk(0, INITIAL_STATE, [], 0)
    if result is None:
        i, cursor = furthest
        if i < len(emitted):
            raise ParseError(
                f"unexpected token {emitted[i]!r} at emitted index {i} "
                f"(expected input token {tokens[cursor]!r} or a tag)" if cursor < len(tokens)
                else f"unexpected token {emitted[i]!r} at emitted index {i}",
                position=cursor,
            )
        raise ParseError("emission ends before the input is covered and tagged", position=furthest[1])
    return result


def render(spans: Sequence[LabeledSpan], tokens: Sequence[str], vocab: CategoryVocabulary) -> str:
    """Human-readable tagged text, e.g. ``a b [(X)] c [(Y)]``."""
    parts = []
    for start, end, cid in spans:
        parts.append(" ".join(tokens[start:end]) + tag_text(vocab.name_of(cid)))
    return " ".join(parts)


class Scorer(Protocol):
    def score(self, history: Sequence[str], candidates: Sequence[str]) -> Sequence[float]:
        """Score of each candidate next token given the emitted history."""


class UniformScorer:
    """Every candidate scores 0, so all legal outputs tie."""

    def score(self, history, candidates):
        return [0.0] * len(candidates)


class BiasScorer:
    """Context-free additive scores per token; unknown tokens score ``default``."""

    def __init__(self, bias: dict[str, float], default: float = 0.0):
        self.bias = dict(bias)
        self.default = default

    def score(self, history, candidates):
        return [self.bias.get(c, self.default) for c in candidates]


class NgramScorer:
    """Add-k smoothed n-gram model over emission sequences.

    Scores are log-probabilities normalized over the full training
    vocabulary, not over the candidate set.
    """

    def __init__(self, order: int = 3, k: float = 0.1):
        if order < 1:
            raise InvalidInputError("n-gram order must be >= 1")
        self.order = order
        self.k = k
        self.counts: dict[tuple, dict[str, int]] = {}
        self.totals: dict[tuple, int] = {}
        self.vocab: set[str] = {EOS}

    def fit(self, sequences: Sequence[Sequence[str]]) -> "NgramScorer":
        for seq in sequences:
            padded = ["<s>"] * (self.order - 1) + list(seq)
            for i in range(self.order - 1, len(padded)):
                ctx = tuple(padded[i - self.order + 1:i])
                tok = padded[i]
                self.vocab.add(tok)
                bucket = self.counts.setdefault(ctx, {})
                bucket[tok] = bucket.get(tok, 0) + 1
                self.totals[ctx] = self.totals.get(ctx, 0) + 1
        return self

    def score(self, history, candidates):
        padded = ["<s>"] * (self.order - 1) + list(history)
        ctx = tuple(padded[len(padded) - self.order + 1:]) if self.order > 1 else ()
        bucket = self.counts.get(ctx, {})
        total = self.totals.get(ctx, 0)
        v = len(self.vocab | set(candidates))
        return [math.log((bucket.get(c, 0) + self.k) / (total + self.k * v)) for c in candidates]


@dataclass
class Hypothesis:
    score: float
    tokens: tuple[str, ...]
    state: DecodeState
    spans: tuple[LabeledSpan, ...]
    seg_start: int

    @property
    def finished(self) -> bool:
        return self.state.finished

    def sort_key(self):
        return (
            -self.score,
            len(self.spans),
            tuple(s.category for s in self.spans),
            self.tokens,
            self.state.cursor,
        )


def _extend(hyp: Hypothesis, tok: str, nxt: DecodeState, closed: str | None, score: float) -> Hypothesis:
    spans, seg_start = hyp.spans, hyp.seg_start
    if closed is not None:
        spans = spans + (LabeledSpan(seg_start, nxt.cursor, closed),)
        seg_start = nxt.cursor
    return Hypothesis(hyp.score + score, hyp.tokens + (tok,), nxt, spans, seg_start)


def _step(scorer: Scorer, hyp: Hypothesis, moves) -> list[Hypothesis]:
    cands = list(dict.fromkeys(tok for tok, _, _ in moves))
    scores = scorer.score(hyp.tokens, cands)
    if len(scores) != len(cands):
        raise InvalidInputError(f"scorer returned {len(scores)} scores for {len(cands)} candidates")
    lookup = dict(zip(cands, scores))
    return [_extend(hyp, tok, nxt, closed, float(lookup[tok])) for tok, nxt, closed in moves]


def _complete_tags(scorer: Scorer, hyp: Hypothesis, trie: TokenTrie, tokens: Sequence[str]) -> list[Hypothesis]:
    """Every way of writing one full tag after ``hyp``."""
    moves = [m for m in successors(hyp.state, trie, tokens) if m[1].cursor == hyp.state.cursor and m[0] != EOS]
    out = []
    frontier = _step(scorer, hyp, moves) if moves else []
    while frontier:
        nxt_frontier = []
        for h in frontier:
            if h.state.node is None:
                out.append(h)
            else:
                nxt_frontier.extend(_step(scorer, h, successors(h.state, trie, tokens)))
        frontier = nxt_frontier
    return out


def constrained_beam_search(
    scorer: Scorer,
    tokens: Sequence[str],
    trie: TokenTrie,
    width: int = 3,
    return_hypothesis: bool = False,
):
    """Beam search over legal emissions; returns the best segmentation.

    Hypotheses are pruned in lockstep with the input: one step copies the
    next input token and then optionally writes one complete tag, so the
    ``width`` survivors of a step have all consumed the same input prefix
    and have no tag open.  Ties prefer fewer spans, then smaller category
    ids.
    """
    if width < 1:
        raise InvalidInputError(f"beam width must be >= 1, got {width}")
    if not tokens:
        raise InvalidInputError("input is empty")
    if not trie.root.children:
        raise InvalidInputError("trie is empty")
    beam = [Hypothesis(0.0, (), INITIAL_STATE, (), 0)]
    n = len(tokens)
    for i in range(n):
        pool = []
        for hyp in beam:
            moves = [m for m in successors(hyp.state, trie, tokens) if m[1].cursor == i + 1]
            for copied in _step(scorer, hyp, moves):
                if i < n - 1:
                    pool.append(copied)
                pool.extend(_complete_tags(scorer, copied, trie, tokens))
        pool.sort(key=Hypothesis.sort_key)
        beam = pool[:width]
    done = []
    for hyp in beam:
        done.extend(_step(scorer, hyp, successors(hyp.state, trie, tokens)))
    done.sort(key=Hypothesis.sort_key)
    best = done[0]
    if return_hypothesis:
        return best
    return list(best.spans)


def sequence_score(scorer: Scorer, emitted: Sequence[str], trie: TokenTrie, tokens: Sequence[str]) -> float:
    """Total score of a legal emission sequence, replaying the candidate
    sets the search would have offered."""
    state = INITIAL_STATE
    total = 0.0
    for i, tok in enumerate(emitted):
        moves = successors(state, trie, tokens)
        cands = list(dict.fromkeys(t for t, _, _ in moves))
        if tok not in cands:
            raise ParseError(f"illegal token {tok!r}", position=i)
        total += float(scorer.score(list(emitted[:i]), cands)[cands.index(tok)])
        state = next(nxt for t, nxt, _ in moves if t == tok)
    return total


def enumerate_segmentations(n_tokens: int, categories: Sequence[str]) -> Iterator[list[LabeledSpan]]:
    """Every labelled total cover of ``n_tokens`` tokens."""
    for cuts in itertools.product((False, True), repeat=max(n_tokens - 1, 0)):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n_tokens]
        pieces = list(zip(bounds, bounds[1:]))
        for labels in itertools.product(categories, repeat=len(pieces)):
            yield [LabeledSpan(s, e, c) for (s, e), c in zip(pieces, labels)]
