"""Gradient training of the hashed-feature CRF with dev-set early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .corpus import Document
from .crf import Transitions, nll_gradients
from .emissions import FeatureBatch, FeatureConfig, featurize, linear_emissions
from .errors import InvalidInputError, TrainingError
from .evaluation import evaluate
from .model import CrfModel, decode
from .tagset import CategoryVocabulary, spans_to_tags

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-6
    batch_size: int = 1
    max_train_len: int = 1024
    eval_interval: int = 2000
    patience: int = 20
    max_epochs: int = 100
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    init_scale: float = 0.1
    window_size: int = 512
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "max_train_len", "eval_interval", "patience", "max_epochs"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, got {getattr(self, name)}")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidInputError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            raise InvalidInputError("invalid Adam hyperparameters")


class RowGrad(NamedTuple):
    """Gradient touching only ``rows`` of a 2-D parameter."""

    rows: np.ndarray
    values: np.ndarray


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _check_finite(name, g):
    values = g.values if isinstance(g, RowGrad) else g
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        raise TrainingError(f"non-finite gradient for {name!r} at index {tuple(bad[0])}")


def adam_update(params: dict, grads: dict, state: AdamState, lr: float,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam step, in place.

    A :class:`RowGrad` updates only its rows (lazy Adam); the bias
    correction always uses the global step.  Returns ``(params, state)``.
    """
    for name, g in grads.items():
        _check_finite(name, g)
    state.step += 1
    c1 = 1.0 - beta1**state.step
    c2 = 1.0 - beta2**state.step
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        if isinstance(g, RowGrad):
            rows = g.rows
            m[rows] = beta1 * m[rows] + (1 - beta1) * g.values
            v[rows] = beta2 * v[rows] + (1 - beta2) * g.values**2
            p[rows] -= lr * (m[rows] / c1) / (np.sqrt(v[rows] / c2) + eps)
        else:
            m *= beta1
            m += (1 - beta1) * g
            v *= beta2
            v += (1 - beta2) * g**2
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def sgd_update(params: dict, grads: dict, lr: float):
    for name, g in grads.items():
        _check_finite(name, g)
    for name, g in grads.items():
        if isinstance(g, RowGrad):
            params[name][g.rows] -= lr * g.values
        else:
            params[name] -= lr * g
    return params


def model_params(model: CrfModel) -> dict:
    tr = model.transitions
    return {"weights": model.emission.weights, "transitions": tr.scores, "start": tr.start, "end": tr.end}


def weight_row_grad(features: FeatureBatch, d_em: np.ndarray) -> RowGrad:
    rows, inverse = np.unique(features.indices, return_inverse=True)
    values = np.zeros((rows.size, d_em.shape[1]))
    np.add.at(values, inverse, d_em[features.token_ids()])
    return RowGrad(rows, values)


class Example(NamedTuple):
    features: FeatureBatch
    gold: list[int]


def prepare_examples(docs: Sequence[Document], model: CrfModel, max_len: int) -> list[Example]:
    out = []
    for doc in docs:
        if doc.spans is None:
            raise InvalidInputError(f"training document {doc.id!r} has no gold spans")
        tags = spans_to_tags(model.tagvocab, len(doc.tokens), doc.spans)
        n = min(len(doc.tokens), max_len)
        if n == 0:
            continue
        out.append(Example(featurize(doc.tokens[:n], model.emission.config), tags[:n]))
    return out


def example_gradients(model: CrfModel, ex: Example):
    em = linear_emissions(ex.features, model.emission)
    d_em, d_tr, value = nll_gradients(em, model.transitions, ex.gold)
    grads = {
        "weights": weight_row_grad(ex.features, d_em),
        "transitions": d_tr.scores,
        "start": d_tr.start,
        "end": d_tr.end,
    }
    return grads, value


def _merge(acc: dict | None, grads: dict) -> dict:
    if acc is None:
        return grads
    out = {}
    for name, g in grads.items():
        a = acc[name]
        if isinstance(g, RowGrad):
            rows = np.concatenate([a.rows, g.rows])
            vals = np.concatenate([a.values, g.values])
            uniq, inv = np.unique(rows, return_inverse=True)
            merged = np.zeros((uniq.size, vals.shape[1]))
            np.add.at(merged, inv, vals)
            out[name] = RowGrad(uniq, merged)
        else:
            out[name] = a + g
    return out


def dev_scores(model: CrfModel, dev: Sequence[Document], window_size: int = 512):
    """Micro P/R/F1 of legality-masked Viterbi on ``dev``."""
    gold, pred = [], []
    for doc in dev:
        em = model.emissions(doc.tokens, window_size)
        pred.append(decode(em, model.transitions, model.tagvocab, legality=True))
        gold.append(doc.spans)
    return evaluate(gold, pred).micro


@dataclass
class TrainResult:
    model: CrfModel
    best_step: int
    best_f1: float
    steps: int
    log: list[dict]


def _check_vocab(docs: Sequence[Document], vocab: CategoryVocabulary, what: str):
    for doc in docs:
        for s in doc.spans or ():
            if s.category not in vocab:
                raise InvalidInputError(f"{what} document {doc.id!r} uses category {s.category!r} outside the vocabulary")


def train(
    corpus: Sequence[Document],
    dev: Sequence[Document],
    vocab: CategoryVocabulary,
    cfg: TrainConfig = TrainConfig(),
    features: FeatureConfig = FeatureConfig(),
    evaluator: Callable[[CrfModel], float | Sequence[float]] | None = None,
    on_record: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train on ``corpus``; keep the snapshot with the best dev F1.

    ``evaluator`` replaces dev-set scoring; it may return an F1 value or a
    ``(precision, recall, f1)`` triple.  Evaluation happens every
    ``eval_interval`` updates and stops after ``patience`` evaluations
    without strict improvement (ties keep the earlier snapshot).
    """
    if not corpus:
        raise InvalidInputError("training corpus is empty")
    _check_vocab(corpus, vocab, "training")
    _check_vocab(dev, vocab, "dev")
    if evaluator is None and not dev:
        raise InvalidInputError("dev set is empty")

    rng = np.random.default_rng(cfg.seed)
    model = CrfModel.initialize(vocab, features, rng, cfg.init_scale)
    examples = prepare_examples(corpus, model, cfg.max_train_len)
    params = model_params(model)
    adam = AdamState()

    def score_dev():
        if evaluator is not None:
            res = evaluator(model)
            if np.ndim(res) == 0:
                return (float("nan"), float("nan"), float(res))
            return tuple(float(x) for x in res)
        return tuple(dev_scores(model, dev, cfg.window_size))

    records: list[dict] = []
    best = (-np.inf, 0, None)  # f1, step, snapshot
    stale = 0
    step = 0
    running = []
    last_eval = 0

    def run_eval():
        nonlocal best, stale, running, last_eval
        p, r, f = score_dev()
        improved = f > best[0]
        if improved:
            best = (f, step, model.copy())
            stale = 0
        else:
            stale += 1
        rec = {
            "step": step,
            "train_nll": float(np.mean(running)) if running else None,
            "dev_precision": p,
            "dev_recall": r,
            "dev_f1": f,
            "improved": bool(improved),
        }
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        log.info("step %d dev F1 %.4f%s", step, f, " *" if improved else "")
        running = []
        last_eval = step
        return stale >= cfg.patience

    def batches() -> Iterator[list[Example]]:
        for _ in range(cfg.max_epochs):
            order = rng.permutation(len(examples))
            for i in range(0, len(order), cfg.batch_size):
                yield [examples[j] for j in order[i:i + cfg.batch_size]]

    stopped = False
    for batch in batches():
        acc = None
        for ex in batch:
            grads, value = example_gradients(model, ex)
            running.append(value)
            acc = _merge(acc, grads)
        if cfg.optimizer == "adam":
            adam_update(params, acc, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        else:
            sgd_update(params, acc, cfg.learning_rate)
        step += 1
        if step % cfg.eval_interval == 0 and run_eval():
            stopped = True
            break
    if not stopped and (last_eval != step or not records):
        run_eval()

    f1, best_step, snapshot = best
    return TrainResult(snapshot, best_step, float(f1), step, records)
