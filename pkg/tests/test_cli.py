import json
import subprocess
import sys

import numpy as np
import pytest

from stanceseg.cli import main, parse_t5_output
from stanceseg.corpus import Document, read_corpus, write_corpus
from stanceseg.emissions import save_emissions
from stanceseg.errors import ParseError
from stanceseg.synthetic import default_vocabulary, make_corpus
from stanceseg.tagset import LabeledSpan, write_vocabulary

TRAIN_ARGS = ["--lr", "0.05", "--eval-interval", "20", "--patience", "2", "--max-epochs", "3", "--hash-bits", "14"]


@pytest.fixture
def data(tmp_path):
    vocab = default_vocabulary(3)
    write_vocabulary(vocab, tmp_path / "vocab.tsv")
    write_corpus(make_corpus(30, vocab, seed=1), tmp_path / "train.jsonl")
    write_corpus(make_corpus(9, vocab, seed=2, prefix="dev"), tmp_path / "dev.jsonl")
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def train_model(d, name="m.bin", seed=0):
    rc = run("--quiet", "--seed", seed, "--vocab", d / "vocab.tsv", "train", "--corpus", d / "train.jsonl",
             "--dev", d / "dev.jsonl", "--out", d / name, "--log", d / f"{name}.log", *TRAIN_ARGS)
    assert rc == 0
    return d / name


def test_train_predict_eval(data, capsys):
    model = train_model(data)
    log = [json.loads(l) for l in (data / "m.bin.log").read_text().splitlines()]
    assert log and "dev_f1" in log[0]
    assert run("predict", "--model", model, "--corpus", data / "dev.jsonl", "--out", data / "p.jsonl") == 0
    pred = read_corpus(data / "p.jsonl")
    assert [d.id for d in pred] == [d.id for d in read_corpus(data / "dev.jsonl")]
    capsys.readouterr()
    assert run("eval", "--gold", data / "dev.jsonl", "--pred", data / "p.jsonl") == 0
    out = capsys.readouterr().out
    assert out.startswith("mode")
    records = [json.loads(l) for l in out.splitlines() if l.startswith("{")]
    assert records[0]["mode"] == "micro"


def test_outputs_are_byte_identical(data):
    a, b = train_model(data, "a.bin"), train_model(data, "b.bin")
    assert a.read_bytes() == b.read_bytes()
    assert (data / "a.bin.log").read_bytes() == (data / "b.bin.log").read_bytes()
    for out, workers in (("p1.jsonl", 1), ("p4.jsonl", 4)):
        run("predict", "--model", a, "--corpus", data / "dev.jsonl", "--out", data / out, "--workers", workers)
    assert (data / "p1.jsonl").read_bytes() == (data / "p4.jsonl").read_bytes()


def test_oracle_boundaries(data):
    model = train_model(data)
    run("predict", "--model", model, "--corpus", data / "dev.jsonl", "--out", data / "o.jsonl", "--oracle-boundaries")
    gold = read_corpus(data / "dev.jsonl")
    pred = read_corpus(data / "o.jsonl")
    for g, p in zip(gold, pred):
        assert [s.start for s in g.spans] == [s.start for s in p.spans]


def test_predict_from_emission_files(data):
    docs = [Document("x", ["a", "b", "c"])]
    write_corpus(docs, data / "c.jsonl")
    (data / "em").mkdir()
    em = np.full((3, 7), -5.0)
    em[0, 3] = em[1, 4] = em[2, 1] = 5.0  # B-202 I-202 B-104
    save_emissions(em, data / "em" / "x.em")
    rc = run("--vocab", data / "vocab.tsv", "predict", "--emissions", data / "em", "--corpus", data / "c.jsonl",
             "--out", data / "p.jsonl")
    assert rc == 0
    assert read_corpus(data / "p.jsonl")[0].spans == [LabeledSpan(0, 2, "202"), LabeledSpan(2, 3, "104")]
    save_emissions(np.zeros((3, 5)), data / "em" / "x.em")
    rc = run("--vocab", data / "vocab.tsv", "predict", "--emissions", data / "em", "--corpus", data / "c.jsonl")
    assert rc == 2


def test_exit_codes(data, capsys):
    assert run("train", "--corpus", data / "train.jsonl", "--dev", data / "nope.jsonl", "--out", data / "m") == 1
    assert "nope.jsonl" in capsys.readouterr().err
    assert run("frobnicate") == 1
    (data / "bad.jsonl").write_text('{"id": "a", "tokens": ["x"], "spans": [[0, 3, "104"]]}\n')
    assert run("eval", "--gold", data / "bad.jsonl", "--pred", data / "dev.jsonl") == 2
    assert run("predict", "--corpus", data / "dev.jsonl") == 1


def test_rile_with_gold(data, capsys):
    spans = [LabeledSpan(i, i + 1, c) for i, c in enumerate(["104"] * 30 + ["504"] * 10 + ["000"] * 60)]
    write_corpus([Document("d", ["w"] * 100, spans, {"party": "A", "year": "2001"}),
                  Document("e", ["w"] * 2, [LabeledSpan(0, 2, "504")], {"party": "B", "year": "2001"})],
                 data / "r.jsonl")
    assert run("rile", "--corpus", data / "r.jsonl", "--gold", data / "r.jsonl") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert recs[0] == {"unit": "d", "rile": 0.2, "n": 100}
    assert recs[-1]["spearman"] == 1.0
    assert run("rile", "--corpus", data / "r.jsonl", "--exclude", "000") == 0
    assert json.loads(capsys.readouterr().out.splitlines()[0])["rile"] == 0.5


def test_project(data, capsys):
    assert run("project", "--train", data / "train.jsonl", "--target", data / "dev.jsonl", "--iters", "200") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert recs and set(recs[0]) == {"party", "year", "x", "y"}
    assert all(r["x"] >= 0 and r["y"] >= 0 for r in recs)


def test_gen_demo_and_tokenize(data, capsys):
    assert run("--vocab", data / "vocab.tsv", "gen-demo", "--text", "We act. Now.") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "We act . Now . [(Military: Positive)]"
    (data / "t.txt").write_text("First line.\n\nSecond one\n")
    assert run("tokenize", "--input", data / "t.txt", "--lines", "--id", "m", "--party", "P") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert recs == [{"id": "m-0", "party": "P", "tokens": ["First", "line", "."]},
                    {"id": "m-1", "party": "P", "tokens": ["Second", "one"]}]


def test_parse_t5_output():
    assert parse_t5_output("We want X. 416~~~ And Y. 501") == [("We want X.", "416"), ("And Y.", "501")]
    assert parse_t5_output("We want X. 416<unk> And Y. 501", "<unk>") == [("We want X.", "416"), ("And Y.", "501")]
    assert parse_t5_output("A. 202.1~~~") == [("A.", "202.1")]
    with pytest.raises(ParseError) as exc:
        parse_t5_output("We want X. 416~~~ And Y.")
    assert exc.value.position == 1


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "stanceseg.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("stanceseg")


def test_eval_identity(data, capsys):
    assert run("eval", "--gold", data / "dev.jsonl", "--pred", data / "dev.jsonl", "--format", "jsonl") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert all(r["f1"] == 1.0 for r in recs[:3])


def test_rile_other_only(data, capsys):
    write_corpus([Document("o", ["w"] * 3, [LabeledSpan(0, 1, "000"), LabeledSpan(1, 3, "999")])], data / "o.jsonl")
    assert run("rile", "--corpus", data / "o.jsonl") == 0
    assert json.loads(capsys.readouterr().out)["rile"] == 0.0


def test_projecting_training_units_reproduces_fit(data, capsys):
    # salience rows are interior mixtures of two positive profiles
    p1, p2 = [3, 2, 1, 1, 1], [1, 1, 2, 3, 3]
    cats = ["104", "202", "305", "504", "000"]
    docs = []
    for a in range(1, 5):
        for b in range(1, 5):
            tokens, spans = [], []
            for c, n in zip(cats, (a * u + b * v for u, v in zip(p1, p2))):
                for _ in range(n):
                    spans.append(LabeledSpan(len(tokens), len(tokens) + 1, c))
                    tokens.append("w")
            docs.append(Document(f"d{a}{b}", tokens, spans))
    write_corpus(docs, data / "mix.jsonl")
    assert run("project", "--train", data / "mix.jsonl", "--target", data / "mix.jsonl", "--by", "doc", "--emit-fit") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    fit = {r["unit"]: (r["c0"], r["c1"]) for r in recs if r.get("set") == "fit"}
    proj = {r["unit"]: (r["x"], r["y"]) for r in recs if "set" not in r}
    assert fit.keys() == proj.keys() and len(fit) == 16
    for unit in fit:
        assert np.allclose(fit[unit], proj[unit], atol=1e-6, rtol=0)
