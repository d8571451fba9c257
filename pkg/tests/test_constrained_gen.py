import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stanceseg.constrained_gen import (
    EOS,
    INITIAL_STATE,
    BiasScorer,
    NgramScorer,
    TokenTrie,
    UniformScorer,
    constrained_beam_search,
    enumerate_segmentations,
    generate,
    legal_continuations,
    parse_tagged_output,
    render,
    sequence_score,
    successors,
)
from stanceseg.errors import InvalidInputError, ParseError
from stanceseg.tagset import CategoryVocabulary, LabeledSpan

VOCAB = CategoryVocabulary((("416", "Anti-Growth Economy"), ("501", "Environmental Protection"), ("000", "Other")))
TRIE = TokenTrie(VOCAB)


def all_emissions(tokens, trie):
    """Every legal emission sequence, by exhaustive expansion."""
    out = []
    stack = [(INITIAL_STATE, ())]
    while stack:
        state, seq = stack.pop()
        if state.finished:
            out.append(seq)
            continue
        for tok, nxt, _ in successors(state, trie, tokens):
            stack.append((nxt, seq + (tok,)))
    return out


def test_tag_tokenization():
    assert TRIE.paths["501"] == ("[", "(", "Environmental", "Protection", ")", "]")


def test_generate_example():
    tokens = ["We", "want", "X", ".", "And", "Y", "."]
    spans = [LabeledSpan(0, 4, "416"), LabeledSpan(4, 7, "501")]
    out = generate(spans, tokens, TRIE)
    assert " ".join(out) == "We want X . [ ( Anti - Growth Economy ) ] And Y . [ ( Environmental Protection ) ] </s>"
    assert parse_tagged_output(out, TRIE, tokens) == spans
    assert render(spans, tokens, VOCAB) == "We want X . [(Anti-Growth Economy)] And Y . [(Environmental Protection)]"


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_emissions_biject_with_segmentations(n):
    tokens = [f"w{i}" for i in range(n)]
    segs = list(enumerate_segmentations(n, VOCAB.ids))
    emitted = all_emissions(tokens, TRIE)
    assert len(emitted) == len(segs) == len(set(emitted))
    parsed = {tuple(parse_tagged_output(e, TRIE, tokens)) for e in emitted}
    assert parsed == {tuple(s) for s in segs}


def test_token_colliding_with_tag_token():
    # an input "(" or "[" must still round-trip
    tokens = ["[", "(", "Other", ")", "]"]
    for seg in enumerate_segmentations(len(tokens), VOCAB.ids):
        assert parse_tagged_output(generate(seg, tokens, TRIE), TRIE, tokens) == seg


def test_legal_continuations():
    tokens = ["a", "b"]
    assert legal_continuations(INITIAL_STATE, TRIE, tokens) == {"a"}
    state = successors(INITIAL_STATE, TRIE, tokens)[0][1]
    assert legal_continuations(state, TRIE, tokens) == {"b", "["}


def test_parse_errors_carry_position():
    tokens = ["a", "b", "c"]
    with pytest.raises(ParseError) as exc:
        parse_tagged_output(["a", "b", "[", "(", "Nope", ")", "]", "c"], TRIE, tokens)
    assert exc.value.position == 2
    with pytest.raises(ParseError):
        parse_tagged_output(["a", "b", "c"], TRIE, tokens)  # no closing tag


def test_trie_rejects_ambiguous_names():
    with pytest.raises(InvalidInputError):
        TokenTrie(CategoryVocabulary((("1", "Peace"), ("2", "Peace"))))
    with pytest.raises(InvalidInputError):
        TokenTrie(CategoryVocabulary((("1", "A-B"), ("2", "A - B"))))


def exhaustive_best(scorer, tokens, trie, cats):
    return max(sequence_score(scorer, generate(s, tokens, trie), trie, tokens)
               for s in enumerate_segmentations(len(tokens), cats))


def random_bias(rng, trie, tokens):
    toks = set(tokens) | {EOS} | {t for p in trie.paths.values() for t in p}
    bias = {t: float(rng.normal()) for t in toks}
    bias["["] = float(rng.choice([bias["["], 10.0, -10.0]))
    return BiasScorer(bias)


def test_beam_finds_argmax_for_context_free_scorers():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(1, 5))
        tokens = [f"w{rng.integers(3)}" for _ in range(n)]
        scorer = random_bias(rng, TRIE, tokens)
        hyp = constrained_beam_search(scorer, tokens, TRIE, 3, return_hypothesis=True)
        assert hyp.score == pytest.approx(exhaustive_best(scorer, tokens, TRIE, VOCAB.ids), abs=1e-9)


def test_uniform_scorer_tie_break():
    spans = constrained_beam_search(UniformScorer(), ["a", "b", "c"], TRIE, 3)
    assert spans == [LabeledSpan(0, 3, "000")]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_wider_beam_never_scores_lower(n, seed):
    rng = np.random.default_rng(seed)
    tokens = [f"w{i}" for i in range(n)]
    scorer = random_bias(rng, TRIE, tokens)
    scores = [constrained_beam_search(scorer, tokens, TRIE, w, return_hypothesis=True).score for w in (1, 2, 3, 8)]
    assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "(", "Other", "."]), min_size=1, max_size=5), st.integers(0, 2**32 - 1))
def test_beam_output_is_always_legal(tokens, seed):
    rng = np.random.default_rng(seed)
    docs = []
    for _ in range(3):
        seg = next(itertools.islice(enumerate_segmentations(len(tokens), VOCAB.ids),
                                    int(rng.integers(0, 3 ** len(tokens))), None), None)
        if seg:
            docs.append(generate(seg, tokens, TRIE))
    scorer = NgramScorer(3).fit(docs)
    spans = constrained_beam_search(scorer, tokens, TRIE, 2)
    assert parse_tagged_output(generate(spans, tokens, TRIE), TRIE, tokens) == spans


def test_ngram_scorer_normalizes():
    scorer = NgramScorer(2, k=0.5).fit([["a", "b", EOS], ["a", "c", EOS]])
    vocab = sorted(scorer.vocab)
    assert np.exp(scorer.score(["a"], vocab)).sum() == pytest.approx(1.0)


def test_search_validates_arguments():
    with pytest.raises(InvalidInputError):
        constrained_beam_search(UniformScorer(), [], TRIE)
    with pytest.raises(InvalidInputError):
        constrained_beam_search(UniformScorer(), ["a"], TRIE, width=0)
