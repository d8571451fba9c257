"""Command-line interface.

Exit codes: 0 success, 1 usage or validation error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analytics import (
    count_categories,
    default_rile_groups,
    nmf_fit,
    nmf_project,
    read_rile_groups,
    rile,
    rile_excluding,
    salience_matrix,
)
from .constrained_gen import (
    NgramScorer,
    TokenTrie,
    UniformScorer,
    constrained_beam_search,
    generate,
    render,
)
from .corpus import Document, corpus_vocabulary, read_corpus, tokenize, write_corpus
from .crf import Transitions
from .emissions import FeatureConfig, load_emissions
from .errors import ParseError, StancesegError
from .evaluation import MODES, evaluate, spearman
from .model import decode, load_model, save_model
from .tagset import CategoryVocabulary, expand_bio, read_vocabulary, span_begins
from .training import TrainConfig, train

log = logging.getLogger("stanceseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


_CATEGORY_RE = re.compile(r"^\d+(?:[._]\d+)*$")
T5_DELIMITERS = ("~~~", "<unk>")


def parse_t5_output(text: str, delimiters: Sequence[str] | str = T5_DELIMITERS, vocab: CategoryVocabulary | None = None):
    """Split text-to-text output ``statement label~~~ statement label ...``.

    Returns ``(statement, category_id)`` pairs.  A category id is the last
    whitespace token of each chunk; it must be in ``vocab`` when given,
    otherwise it must look like a numeric code (``416``, ``202.1``).
    """
    if isinstance(delimiters, str):
        delimiters = (delimiters,)
    pattern = "|".join(re.escape(d) for d in delimiters)
    chunks = [c.strip() for c in re.split(pattern, text)]
    if chunks and not chunks[-1]:
        chunks.pop()
    out = []
    for i, chunk in enumerate(chunks):
        parts = chunk.rsplit(None, 1)
        label = parts[-1] if parts else ""
        ok = label in vocab if vocab is not None else bool(_CATEGORY_RE.match(label))
        if len(parts) != 2 or not ok:
            raise ParseError(f"chunk {i} has no trailing category id: {chunk[:60]!r}", position=i)
        out.append((parts[0].strip(), label))
    return out


def _write_jsonl(records, fh):
    for rec in records:
        fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _require_file(path, what):
    if path is None:
        raise UsageError(f"missing {what}")
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _vocab(args, docs: Sequence[Document] | None = None) -> CategoryVocabulary:
    if args.vocab:
        return read_vocabulary(_require_file(args.vocab, "vocabulary file"))
    if docs is None:
        raise UsageError("--vocab is required")
    vocab = corpus_vocabulary(docs)
    if len(vocab) == 0:
        raise UsageError("cannot infer a vocabulary: corpus has no spans; pass --vocab")
    return vocab


def cmd_train(args) -> int:
    corpus_path = _require_file(args.corpus, "training corpus")
    dev_path = _require_file(args.dev, "dev corpus")
    train_docs = read_corpus(corpus_path, require_spans=True)
    vocab = _vocab(args, train_docs)
    train_docs = read_corpus(corpus_path, vocab, require_spans=True)
    dev_docs = read_corpus(dev_path, vocab, require_spans=True)
    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_train_len=args.max_train_len,
        eval_interval=args.eval_interval,
        patience=args.patience,
        max_epochs=args.max_epochs,
        optimizer=args.optimizer,
        window_size=args.window,
        seed=args.seed,
    )
    features = FeatureConfig(hash_dim=2**args.hash_bits, seed=args.seed)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def on_record(rec):
        if log_fh:
            log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
            log_fh.flush()

    try:
        result = train(train_docs, dev_docs, vocab, cfg, features, on_record=on_record)
    finally:
        if log_fh:
            log_fh.close()
    save_model(result.model, args.out)
    log.info("best dev F1 %.4f at step %d of %d; model written to %s", result.best_f1, result.best_step, result.steps, args.out)
    return EXIT_OK


def _emission_source(args, docs):
    """Callable ``doc -> (T x K emissions, Transitions, TagVocabulary)``."""
    model = load_model(_require_file(args.model, "model file")) if args.model else None
    if args.emissions:
        src = Path(args.emissions)
        if not src.exists():
            raise UsageError(f"emissions path not found: {src}")
        if model is not None:
            tagvocab, transitions = model.tagvocab, model.transitions
        else:
            tagvocab = expand_bio(_vocab(args))
            transitions = Transitions.zeros(len(tagvocab))
        if src.is_file() and len(docs) != 1:
            raise UsageError("a single emissions file needs a one-document corpus; pass a directory of <id>.em files")

        def source(doc):
            path = src if src.is_file() else src / f"{doc.id}.em"
            return load_emissions(path, n_tags=len(tagvocab), n_tokens=len(doc.tokens)), transitions, tagvocab

        return source
    if model is None:
        raise UsageError("predict needs --model or --emissions")
    return lambda doc: (model.emissions(doc.tokens, args.window), model.transitions, model.tagvocab)


def cmd_predict(args) -> int:
    docs = read_corpus(_require_file(args.corpus, "corpus"))
    source = _emission_source(args, docs)
    if args.oracle_boundaries:
        missing = [d.id for d in docs if d.spans is None]
        if missing:
            raise StancesegError(f"--oracle-boundaries needs gold spans; missing for {missing[0]!r}")

    def predict(doc):
        if not doc.tokens:
            return doc.with_spans([])
        em, transitions, tagvocab = source(doc)
        begins = span_begins(doc.spans) if args.oracle_boundaries else None
        return doc.with_spans(decode(em, transitions, tagvocab, legality=args.legality_mask, oracle_begins=begins))

    with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
        out = list(pool.map(predict, docs))
    if args.out in (None, "-"):
        _write_jsonl((d.to_record() for d in out), sys.stdout)
    else:
        write_corpus(out, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    gold = read_corpus(_require_file(args.gold, "gold corpus"), require_spans=True)
    pred = read_corpus(_require_file(args.pred, "predicted corpus"), require_spans=True)
    by_id = {d.id: d for d in pred}
    missing = [d.id for d in gold if d.id not in by_id]
    if missing:
        raise StancesegError(f"predicted corpus lacks document {missing[0]!r}")
    report = evaluate([d.spans for d in gold], [by_id[d.id].spans for d in gold])
    if args.format in ("text", "both"):
        print(report.format_table())
    if args.format == "both":
        print()
    if args.format in ("jsonl", "both"):
        _write_jsonl(report.records(), sys.stdout)
    return EXIT_OK


def _unit_key(doc: Document, by: str):
    if by == "doc":
        return (doc.id,)
    return (doc.meta.get("party", ""), doc.meta.get("year", ""))


def _unit_counts(docs, by):
    units: dict[tuple, Counter] = {}
    for doc in docs:
        if doc.spans is None:
            raise StancesegError(f"document {doc.id!r} has no spans")
        units.setdefault(_unit_key(doc, by), Counter()).update(count_categories(doc.spans))
    return units


def _unit_record(key, by):
    if by == "doc":
        return {"unit": key[0]}
    return {"party": key[0], "year": key[1]}


def cmd_rile(args) -> int:
    groups = read_rile_groups(_require_file(args.groups, "RILE groups file")) if args.groups else default_rile_groups()
    docs = read_corpus(_require_file(args.corpus, "corpus"))
    units = _unit_counts(docs, args.by)

    def score(counts):
        return rile_excluding(counts, groups, args.exclude) if args.exclude else rile(counts, groups)

    scores = {key: score(counts) for key, counts in units.items()}
    records = []
    for key, counts in units.items():
        rec = _unit_record(key, args.by)
        rec.update({"rile": scores[key], "n": sum(counts.values())})
        records.append(rec)
    if args.gold:
        gold_units = _unit_counts(read_corpus(_require_file(args.gold, "gold corpus")), args.by)
        keys = [k for k in units if k in gold_units]
        rho = spearman([scores[k] for k in keys], [score(gold_units[k]) for k in keys])
        records.append({"spearman": rho, "units": len(keys)})
    with _output(args.out) as fh:
        _write_jsonl(records, fh)
    return EXIT_OK


def cmd_project(args) -> int:
    train_docs = read_corpus(_require_file(args.train, "training corpus"))
    target_docs = read_corpus(_require_file(args.target, "target corpus")) if args.target else []
    train_units = _unit_counts(train_docs, "doc")
    if args.vocab:
        categories = read_vocabulary(args.vocab).ids
    else:
        categories = sorted({c for counts in train_units.values() for c in counts})
    keys = list(train_units)
    x, kept = salience_matrix([train_units[k] for k in keys], categories)
    if x.shape[0] == 0:
        raise StancesegError("no non-empty training units")
    w, h, trace = nmf_fit(x, args.k, args.iters, args.seed)
    log.info("NMF objective %.6g after %d sweeps", trace[-1], len(trace) - 1)
    with _output(args.out) as fh:
        if args.emit_fit:
            for row, i in zip(w, kept):
                rec = {"set": "fit", **_unit_record(keys[i], "doc")}
                rec.update({f"c{j}": float(v) for j, v in enumerate(row)})
                _write_jsonl([rec], fh)
        target_units = _unit_counts(target_docs, args.by)
        tkeys = list(target_units)
        xt, tkept = salience_matrix([target_units[k] for k in tkeys], categories)
        coords = nmf_project(h, xt) if xt.shape[0] else np.zeros((0, args.k))
        for row, i in zip(coords, tkept):
            rec = _unit_record(tkeys[i], args.by)
            rec.update({"x": float(row[0]), "y": float(row[1]) if len(row) > 1 else 0.0})
            _write_jsonl([rec], fh)
    return EXIT_OK


def cmd_gen_demo(args) -> int:
    vocab = _vocab(args)
    if args.text is not None:
        text = args.text
    else:
        text = Path(_require_file(args.input, "input text")).read_text(encoding="utf-8")
    tokens = tokenize(text)
    if not tokens:
        raise StancesegError("input text has no tokens")
    trie = TokenTrie(vocab)
    if args.ngram_corpus:
        docs = read_corpus(_require_file(args.ngram_corpus, "n-gram corpus"), vocab, require_spans=True)
        scorer = NgramScorer(args.ngram_order).fit([generate(d.spans, d.tokens, trie) for d in docs])
    else:
        scorer = UniformScorer()
    spans = constrained_beam_search(scorer, tokens, trie, args.width)
    print(render(spans, tokens, vocab))
    _write_jsonl(([s.start, s.end, s.category] for s in spans), sys.stdout)
    return EXIT_OK


def cmd_tokenize(args) -> int:
    text = Path(_require_file(args.input, "input text")).read_text(encoding="utf-8") if args.input not in (None, "-") else sys.stdin.read()
    if args.lines:
        chunks = [line for line in text.splitlines() if line.strip()]
        ids = [f"{args.id}-{i}" for i in range(len(chunks))]
    else:
        chunks, ids = [text], [args.id]
    meta = {k: v for k, v in (("party", args.party), ("year", args.year), ("country", args.country)) if v}
    docs = [Document(i, tokenize(c), None, dict(meta)) for i, c in zip(ids, chunks)]
    with _output(args.out) as fh:
        _write_jsonl((d.to_record() for d in docs), fh)
    return EXIT_OK


def cmd_parse_t5(args) -> int:
    text = Path(_require_file(args.input, "input text")).read_text(encoding="utf-8")
    vocab = read_vocabulary(args.vocab) if args.vocab else None
    delims = (args.delimiter,) if args.delimiter else T5_DELIMITERS
    for statement, label in parse_t5_output(text, delims, vocab):
        print(json.dumps({"statement": statement, "category": label}, ensure_ascii=False))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    common.add_argument("--vocab", default=argparse.SUPPRESS, help="category vocabulary file (id<TAB>name)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="stanceseg", description=__doc__.splitlines()[0], parents=[])
    p.add_argument("--version", action="version", version=f"stanceseg {__version__}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab", default=None)
    p.add_argument("--quiet", action="store_true", default=False)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train a CRF segmenter")
    t.add_argument("--corpus", required=True)
    t.add_argument("--dev", required=True)
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--log", help="line-delimited training log")
    t.add_argument("--lr", type=float, default=5e-6)
    t.add_argument("--batch-size", type=int, default=1)
    t.add_argument("--max-train-len", type=int, default=1024)
    t.add_argument("--eval-interval", type=int, default=2000)
    t.add_argument("--patience", type=int, default=20)
    t.add_argument("--max-epochs", type=int, default=100)
    t.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    t.add_argument("--hash-bits", type=int, default=20)
    t.add_argument("--window", type=int, default=512)
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="segment and label a corpus")
    pr.add_argument("--model")
    pr.add_argument("--emissions", help="emission file, or directory of <doc id>.em files")
    pr.add_argument("--corpus", required=True)
    pr.add_argument("--out", default="-")
    pr.add_argument("--oracle-boundaries", action="store_true")
    pr.add_argument("--legality-mask", dest="legality_mask", action="store_true", default=True)
    pr.add_argument("--no-legality-mask", dest="legality_mask", action="store_false")
    pr.add_argument("--window", type=int, default=512)
    pr.add_argument("--workers", type=int, default=1)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", parents=[common], help="exact-match span P/R/F1")
    e.add_argument("--gold", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--format", choices=("text", "jsonl", "both"), default="both")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("rile", parents=[common], help="RILE score per unit")
    r.add_argument("--corpus", required=True)
    r.add_argument("--groups")
    r.add_argument("--exclude", action="append", default=[])
    r.add_argument("--by", choices=("doc", "party-year"), default="doc")
    r.add_argument("--gold", help="gold corpus; adds a Spearman correlation record")
    r.add_argument("--out", default="-")
    r.set_defaults(func=cmd_rile)

    pj = sub.add_parser("project", parents=[common], help="NMF salience trajectories")
    pj.add_argument("--train", required=True, help="corpus whose documents train the basis")
    pj.add_argument("--target", help="corpus to project")
    pj.add_argument("--by", choices=("doc", "party-year"), default="party-year")
    pj.add_argument("--k", type=int, default=2)
    pj.add_argument("--iters", type=int, default=2000)
    pj.add_argument("--emit-fit", action="store_true", help="also print fit-time coordinates of training units")
    pj.add_argument("--out", default="-")
    pj.set_defaults(func=cmd_project)

    g = sub.add_parser("gen-demo", parents=[common], help="constrained generation demo")
    g.add_argument("--input")
    g.add_argument("--text")
    g.add_argument("--width", type=int, default=3)
    g.add_argument("--ngram-corpus", help="train an n-gram scorer on this corpus")
    g.add_argument("--ngram-order", type=int, default=3)
    g.set_defaults(func=cmd_gen_demo)

    tk = sub.add_parser("tokenize", parents=[common], help="plain text to corpus records")
    tk.add_argument("--input", default="-")
    tk.add_argument("--id", default="doc")
    tk.add_argument("--lines", action="store_true", help="one document per non-empty line")
    tk.add_argument("--party")
    tk.add_argument("--year")
    tk.add_argument("--country")
    tk.add_argument("--out", default="-")
    tk.set_defaults(func=cmd_tokenize)

    t5 = sub.add_parser("parse-t5", parents=[common], help="split text-to-text output into statements")
    t5.add_argument("--input", required=True)
    t5.add_argument("--delimiter", choices=T5_DELIMITERS)
    t5.set_defaults(func=cmd_parse_t5)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"stanceseg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"stanceseg {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StancesegError, ValueError, OSError) as exc:
        print(f"stanceseg {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
