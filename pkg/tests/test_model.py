import json

import numpy as np
import pytest

from stanceseg.corpus import Document, corpus_vocabulary, read_corpus, tokenize, write_corpus
from stanceseg.emissions import FeatureConfig
from stanceseg.errors import ModelFormatError, ParseError
from stanceseg.model import CrfModel, decode, load_model, save_model
from stanceseg.synthetic import default_vocabulary, make_corpus
from stanceseg.tagset import LabeledSpan


def _model(seed=0):
    rng = np.random.default_rng(seed)
    model = CrfModel.initialize(default_vocabulary(3), FeatureConfig(hash_dim=2**10), rng)
    rows = rng.choice(2**10, 40, replace=False)
    model.emission.weights[rows] = rng.normal(size=(40, len(model.tagvocab)))
    return model


def test_model_roundtrip(tmp_path):
    model = _model()
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.tagvocab == model.tagvocab
    assert back.emission.config == model.emission.config
    assert np.array_equal(back.emission.weights, model.emission.weights)
    assert np.array_equal(back.transitions.scores, model.transitions.scores)
    save_model(back, tmp_path / "again.bin")
    assert (tmp_path / "m.bin").read_bytes() == (tmp_path / "again.bin").read_bytes()


def test_model_file_is_validated(tmp_path):
    save_model(_model(), tmp_path / "m.bin")
    data = (tmp_path / "m.bin").read_bytes()
    (tmp_path / "short.bin").write_bytes(data[:-8])
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "short.bin")
    (tmp_path / "junk.bin").write_bytes(b"hello")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "junk.bin")
    head, rest = data.split(b"\n", 2)[1], data.split(b"\n", 2)[2]
    header = json.loads(head)
    header["format_version"] = 99
    (tmp_path / "v.bin").write_bytes(b"STANCESEG-MODEL\n" + json.dumps(header).encode() + b"\n" + rest)
    with pytest.raises(ModelFormatError, match="version"):
        load_model(tmp_path / "v.bin")


def test_decode_modes():
    model = _model(1)
    tokens = tokenize("We will act. Then we rest.")
    em = model.emissions(tokens)
    spans = decode(em, model.transitions, model.tagvocab)
    assert spans[0].start == 0 and spans[-1].end == len(tokens)
    forced = decode(em, model.transitions, model.tagvocab, oracle_begins=[0, 4])
    assert [s.start for s in forced] == [0, 4]


def test_tokenize():
    assert tokenize("Don't stop, 2024!") == ["Don", "'", "t", "stop", ",", "2024", "!"]


def test_corpus_roundtrip(tmp_path):
    docs = make_corpus(4, seed=1)
    docs.append(Document("raw", ["a", "b"], None, {"party": "X"}))
    write_corpus(docs, tmp_path / "c.jsonl")
    back = read_corpus(tmp_path / "c.jsonl")
    assert back == docs
    assert list(corpus_vocabulary(back)) == list(corpus_vocabulary(docs[:4]))


@pytest.mark.parametrize(
    "record",
    [
        '{"id": "a", "tokens": ["x", "y"], "spans": [[0, 1, "c"]]}',
        '{"id": "a", "tokens": ["x", "y"], "spans": [[0, 1, "c"], [0, 2, "c"]]}',
        '{"id": "a", "tokens": "x y"}',
        '{"tokens": []}',
        "[1, 2]",
        "{",
    ],
)
def test_bad_records_raise_parse_errors(tmp_path, record):
    (tmp_path / "c.jsonl").write_text('{"id": "ok", "tokens": ["x"]}\n' + record + "\n")
    with pytest.raises(ParseError) as exc:
        read_corpus(tmp_path / "c.jsonl")
    assert exc.value.line == 2


def test_unknown_category_against_vocabulary(tmp_path):
    docs = [Document("d", ["x"], [LabeledSpan(0, 1, "999")])]
    write_corpus(docs, tmp_path / "c.jsonl")
    with pytest.raises(ParseError):
        read_corpus(tmp_path / "c.jsonl", default_vocabulary(2))
