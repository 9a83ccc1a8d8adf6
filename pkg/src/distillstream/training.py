"""Distillation trainer: gated cross-entropy against teacher distributions.

The per-sample objective is ``multiplier * H(g, f)`` where ``g`` is the
teacher distribution, ``f`` the student's softmax output, and the multiplier
is the hard confidence gate (0 or 1). Gradients are exact analytic forms; the
softmax+cross-entropy composite reduces to ``f - g`` at the logit layer.
Optimization is plain mini-batch Adam with bias correction.

Gated-out samples are excluded from batching entirely, so a corpus with
low-confidence samples produces bitwise the same parameter trajectory as the
confident subset alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .corpus import ImageItem
from .student import StudentModel
from .teacher import (
    CLASS_ORDER,
    N_CLASSES,
    GateResult,
    GatingConfig,
    SentimentDistribution,
    TeacherProvider,
    gate,
    log_softmax,
    score,
)

LOG_CLAMP = 1e-12


class ZeroGatedSamplesError(ValueError):
    """Every sample fell below its confidence threshold."""

    def __init__(self, thresholds):
        super().__init__(
            f"no sample passed the confidence gate at thresholds {tuple(thresholds)}; "
            "lower the gating thresholds"
        )


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    adam_eps: float = 1e-7
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    gating: GatingConfig = field(default_factory=GatingConfig)
    feature_noise_sigma: float = 0.0
    architecture: str = "linear"
    hidden: int = 64
    holdout_fraction: float = 0.1
    hard_labels: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.adam_eps <= 0:
            raise ValueError("lr and adam_eps must be positive")
        if not 0.0 <= self.adam_beta1 < 1.0 or not 0.0 <= self.adam_beta2 < 1.0:
            raise ValueError("adam betas must lie in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 1:
            raise ValueError("batch_size/patience must be >= 1, max_epochs >= 0")
        if self.feature_noise_sigma < 0:
            raise ValueError("feature_noise_sigma must be nonnegative")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")

    def to_json_dict(self) -> dict:
        return {
            "lr": self.lr,
            "adam_eps": self.adam_eps,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "gating": list(self.gating.c),
            "feature_noise_sigma": self.feature_noise_sigma,
            "architecture": self.architecture,
            "hidden": self.hidden,
            "holdout_fraction": self.holdout_fraction,
            "hard_labels": self.hard_labels,
        }


@dataclass(frozen=True)
class TrainingSample:
    embedding: np.ndarray        # (n,) float64
    teacher_dist: np.ndarray     # (3,) float64, on the simplex
    multiplier: int              # 0 or 1, from the gate
    argmax_class: int


def make_training_sample(
    embedding: np.ndarray,
    dist: SentimentDistribution | np.ndarray,
    gating: GatingConfig,
    *,
    hard_labels: bool = False,
) -> TrainingSample:
    """Gate a teacher distribution and package it with its embedding."""
    p = dist.p if isinstance(dist, SentimentDistribution) else np.asarray(dist, dtype=np.float64)
    result: GateResult = gate(p, gating)
    target = p.astype(np.float64)
    if hard_labels:
        target = np.zeros(N_CLASSES)
        target[result.argmax_class] = 1.0
    return TrainingSample(
        embedding=np.asarray(embedding, dtype=np.float64),
        teacher_dist=target,
        multiplier=result.multiplier,
        argmax_class=result.argmax_class,
    )


def sample_loss(model: StudentModel, s: TrainingSample) -> float:
    """Gated cross-entropy -sum_k g_k log f_k; exactly zero when gated out."""
    if s.multiplier == 0:
        return 0.0
    logp = log_softmax(model.logits(s.embedding))
    logp = np.maximum(logp, np.log(LOG_CLAMP))
    return float(-np.dot(s.teacher_dist, logp))


def _stack(batch: Iterable[TrainingSample]):
    batch = list(batch)
    X = np.stack([s.embedding for s in batch])
    G = np.stack([s.teacher_dist for s in batch])
    M = np.array([s.multiplier for s in batch], dtype=np.float64)
    return X, G, M


def _loss_and_grads(model: StudentModel, X: np.ndarray, G: np.ndarray, M: np.ndarray):
    """Mean gated loss over the batch plus exact gradients for every parameter."""
    B = X.shape[0]
    if model.architecture == "mlp1":
        pre = X @ model.params["W1"] + model.params["b1"]
        hidden = np.maximum(pre, 0.0)
    else:
        hidden = X
    logits = hidden @ model.params["W2"] + model.params["b2"]
    lp = log_softmax(logits)
    probs = np.exp(lp)
    logp = np.maximum(lp, np.log(LOG_CLAMP))
    loss = float(np.sum(M * -(G * logp).sum(axis=1)) / B)

    delta = (probs - G) * (M / B)[:, None]
    grads = {
        "W2": hidden.T @ delta,
        "b2": delta.sum(axis=0),
    }
    if model.architecture == "mlp1":
        dhidden = (delta @ model.params["W2"].T) * (pre > 0.0)
        grads["W1"] = X.T @ dhidden
        grads["b1"] = dhidden.sum(axis=0)
    return loss, grads


def batch_loss(model: StudentModel, batch: list[TrainingSample]) -> float:
    """Mean gated cross-entropy over a batch."""
    if not batch:
        raise ValueError("batch must be non-empty")
    X, G, M = _stack(batch)
    loss, _ = _loss_and_grads(model, X, G, M)
    return loss


def backward(model: StudentModel, batch: list[TrainingSample]) -> dict[str, np.ndarray]:
    """Exact gradients of the mean gated loss; gated-out samples contribute zero."""
    if not batch:
        raise ValueError("batch must be non-empty")
    X, G, M = _stack(batch)
    _, grads = _loss_and_grads(model, X, G, M)
    return grads


@dataclass
class AdamState:
    t: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def for_model(cls, model: StudentModel) -> "AdamState":
        return cls(
            t=0,
            m={k: np.zeros_like(v) for k, v in model.params.items()},
            v={k: np.zeros_like(v) for k, v in model.params.items()},
        )


def adam_step(
    model: StudentModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainConfig,
) -> tuple[StudentModel, AdamState]:
    """One bias-corrected Adam update, applied in place to the model."""
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, grad in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        model.params[name] -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.adam_eps)
    return model, state


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    holdout_loss: float | None
    holdout_agreement: float | None


@dataclass
class TrainReport:
    epochs: list[EpochStats]
    gated_counts: dict[str, int]
    ungated_counts: dict[str, int]
    n_gated: int
    n_train: int
    n_holdout: int
    best_epoch: int
    final_holdout_loss: float | None
    final_holdout_agreement: float | None
    class_breakdown: dict[str, dict[str, int]]
    seed: int

    def to_json_dict(self) -> dict:
        return {
            "epochs": [
                {
                    "epoch": e.epoch,
                    "train_loss": e.train_loss,
                    "holdout_loss": e.holdout_loss,
                    "holdout_agreement": e.holdout_agreement,
                }
                for e in self.epochs
            ],
            "gated_counts": self.gated_counts,
            "ungated_counts": self.ungated_counts,
            "n_gated": self.n_gated,
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
            "best_epoch": self.best_epoch,
            "final_holdout_loss": self.final_holdout_loss,
            "final_holdout_agreement": self.final_holdout_agreement,
            "class_breakdown": self.class_breakdown,
            "seed": self.seed,
        }


def class_breakdown_table(
    tweets: dict[str, int], images: dict[str, int], dedup_images: dict[str, int]
) -> dict[str, dict[str, int]]:
    """Per-class corpus bookkeeping table with a totals row."""
    table = {}
    for name in CLASS_ORDER:
        table[name] = {
            "tweets": int(tweets.get(name, 0)),
            "images": int(images.get(name, 0)),
            "deduplicated_images": int(dedup_images.get(name, 0)),
        }
    table["total"] = {
        key: sum(table[name][key] for name in CLASS_ORDER)
        for key in ("tweets", "images", "deduplicated_images")
    }
    return table


def _holdout_metrics(model: StudentModel, X, G, classes) -> tuple[float, float]:
    logp = np.maximum(log_softmax(model.logits(X)), np.log(LOG_CLAMP))
    loss = float(-(G * logp).sum(axis=1).mean())
    agreement = float((np.argmax(logp, axis=1) == classes).mean())
    return loss, agreement


def train_from_samples(
    samples: list[TrainingSample],
    config: TrainConfig,
    *,
    corpus_breakdown: dict[str, dict[str, int]] | None = None,
) -> tuple[StudentModel, TrainReport]:
    """Optimize a fresh student on pre-gated samples; see :func:`train`."""
    gated = [s for s in samples if s.multiplier == 1]
    if not gated:
        raise ZeroGatedSamplesError(config.gating.c)

    gated_counts = {name: 0 for name in CLASS_ORDER}
    ungated_counts = {name: 0 for name in CLASS_ORDER}
    for s in samples:
        bucket = gated_counts if s.multiplier == 1 else ungated_counts
        bucket[CLASS_ORDER[s.argmax_class]] += 1

    dim = gated[0].embedding.shape[0]
    model = StudentModel.create(config.architecture, dim, hidden=config.hidden, seed=config.seed)
    state = AdamState.for_model(model)
    rng = np.random.default_rng(config.seed)

    n_gated = len(gated)
    n_holdout = min(int(config.holdout_fraction * n_gated), n_gated - 1)
    perm = rng.permutation(n_gated)
    holdout = [gated[i] for i in perm[:n_holdout]]
    train_set = [gated[i] for i in perm[n_holdout:]]

    Xt = np.stack([s.embedding for s in train_set])
    Gt = np.stack([s.teacher_dist for s in train_set])
    Mt = np.ones(len(train_set))
    if holdout:
        Xh = np.stack([s.embedding for s in holdout])
        Gh = np.stack([s.teacher_dist for s in holdout])
        Ch = np.array([s.argmax_class for s in holdout])

    def stop_metric(m: StudentModel) -> float:
        if holdout:
            return _holdout_metrics(m, Xh, Gh, Ch)[0]
        loss, _ = _loss_and_grads(m, Xt, Gt, Mt)
        return loss

    best_model = model.copy()
    best_metric = stop_metric(model)
    best_epoch = 0
    epochs: list[EpochStats] = []
    since_improved = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb = Xt[idx]
            if config.feature_noise_sigma > 0:
                Xb = Xb + config.feature_noise_sigma * rng.standard_normal(Xb.shape)
            loss, grads = _loss_and_grads(model, Xb, Gt[idx], np.ones(len(idx)))
            adam_step(model, grads, state, config)
            total += loss * len(idx)
        train_loss = total / len(train_set)

        if holdout:
            hold_loss, hold_agree = _holdout_metrics(model, Xh, Gh, Ch)
            metric = hold_loss
        else:
            hold_loss = hold_agree = None
            metric = stop_metric(model)
        epochs.append(EpochStats(epoch, train_loss, hold_loss, hold_agree))

        if metric < best_metric:
            best_metric = metric
            best_model = model.copy()
            best_epoch = epoch
            since_improved = 0
        else:
            since_improved += 1
            if since_improved >= config.patience:
                break

    if holdout:
        final_loss, final_agree = _holdout_metrics(best_model, Xh, Gh, Ch)
    else:
        final_loss = final_agree = None

    if corpus_breakdown is None:
        # Bare samples carry no record identity: count each pair as one tweet
        # and one already-deduplicated image.
        pair_counts = {name: 0 for name in CLASS_ORDER}
        for s in samples:
            pair_counts[CLASS_ORDER[s.argmax_class]] += 1
        corpus_breakdown = class_breakdown_table(pair_counts, pair_counts, pair_counts)

    report = TrainReport(
        epochs=epochs,
        gated_counts=gated_counts,
        ungated_counts=ungated_counts,
        n_gated=n_gated,
        n_train=len(train_set),
        n_holdout=n_holdout,
        best_epoch=best_epoch,
        final_holdout_loss=final_loss,
        final_holdout_agreement=final_agree,
        class_breakdown=corpus_breakdown,
        seed=config.seed,
    )
    return best_model, report


def train(
    pairs: Iterable[tuple[str, ImageItem]],
    provider: TeacherProvider,
    config: TrainConfig,
) -> tuple[StudentModel, TrainReport]:
    """Score, gate, and distill a pair stream into a fresh student model.

    Each distinct text is scored exactly once (the teacher is frozen). Gated
    samples are shuffled per epoch with the seeded RNG and optimized in
    mini-batches; training stops at ``max_epochs`` or when the held-out mean
    gated loss has not improved for ``patience`` epochs, and the model with
    the best held-out loss is returned.
    """
    cache: dict[str, SentimentDistribution] = {}
    samples: list[TrainingSample] = []
    texts_per_class: dict[str, set] = {name: set() for name in CLASS_ORDER}
    pair_counts = {name: 0 for name in CLASS_ORDER}
    for text, item in pairs:
        dist = cache.get(text)
        if dist is None:
            dist = score(provider, text)
            cache[text] = dist
        sample = make_training_sample(
            item.embedding, dist, config.gating, hard_labels=config.hard_labels
        )
        samples.append(sample)
        name = CLASS_ORDER[sample.argmax_class]
        texts_per_class[name].add(text)
        pair_counts[name] += 1

    breakdown = class_breakdown_table(
        {k: len(v) for k, v in texts_per_class.items()}, pair_counts, pair_counts
    )
    return train_from_samples(samples, config, corpus_breakdown=breakdown)
