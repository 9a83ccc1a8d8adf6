"""Benchmark protocol: emotion remapping, neutral masking, splits, accuracy.

Binary benchmarks keep their labels; fine-grained emotion benchmarks collapse
onto (positive, negative) through fixed remap tables. At prediction time the
student's neutral output is masked and the larger of the positive/negative
confidences wins. Two split protocols are supported: 5-fold cross-validation
and repeated random 80/5/15 train/val/test splits; reported spread is the
population standard deviation over split accuracies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .student import StudentModel
from .teacher import NEGATIVE, NEUTRAL, POSITIVE, N_CLASSES
from .training import AdamState, TrainConfig, TrainingSample, _loss_and_grads, adam_step

LABEL_SPACES = {
    "binary_polarity": ("positive", "negative"),
    "emotions6": ("Joy", "Surprise", "Anger", "Disgust", "Fear", "Sadness"),
    "emotions8": (
        "Awe", "Amusement", "Excitement", "Contentment",
        "Fear", "Disgust", "Sadness", "Anger",
    ),
}

# Fixed emotion -> polarity collapse tables.
EMOTIONS8_REMAP = {
    "Awe": "positive", "Amusement": "positive",
    "Excitement": "positive", "Contentment": "positive",
    "Fear": "negative", "Disgust": "negative",
    "Sadness": "negative", "Anger": "negative",
}
EMOTIONS6_REMAP = {
    "Joy": "positive", "Surprise": "positive",
    "Anger": "negative", "Disgust": "negative",
    "Fear": "negative", "Sadness": "negative",
}
BINARY_REMAP = {"positive": "positive", "negative": "negative"}

SPLIT_PROTOCOLS = ("kfold5", "random_80_5_15")


class EvalSchemaError(ValueError):
    """A benchmark file or spec disagrees with its declared schema."""


def default_remap(label_space: str) -> dict[str, str]:
    try:
        return dict(
            {
                "binary_polarity": BINARY_REMAP,
                "emotions6": EMOTIONS6_REMAP,
                "emotions8": EMOTIONS8_REMAP,
            }[label_space]
        )
    except KeyError:
        raise EvalSchemaError(f"unknown label space {label_space!r}") from None


@dataclass(frozen=True)
class EvalSpec:
    """Benchmark descriptor: label space, remap table, split protocol."""

    name: str
    label_space: str
    remap: dict[str, str] = field(default_factory=dict)
    split_protocol: str = "kfold5"
    n_repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.label_space not in LABEL_SPACES:
            raise EvalSchemaError(f"unknown label space {self.label_space!r}")
        if self.split_protocol not in SPLIT_PROTOCOLS:
            raise EvalSchemaError(f"unknown split protocol {self.split_protocol!r}")
        if self.n_repeats < 1:
            raise EvalSchemaError("n_repeats must be positive")
        remap = dict(self.remap) if self.remap else default_remap(self.label_space)
        space = set(LABEL_SPACES[self.label_space])
        if set(remap) != space:
            raise EvalSchemaError(
                f"remap keys {sorted(remap)} must cover label space {sorted(space)}"
            )
        if not set(remap.values()) <= {"positive", "negative"}:
            raise EvalSchemaError("remap values must be 'positive' or 'negative'")
        if self.label_space == "binary_polarity" and remap != BINARY_REMAP:
            raise EvalSchemaError("binary benchmarks use the identity remap")
        object.__setattr__(self, "remap", remap)


@dataclass(frozen=True)
class LabeledSample:
    id: str
    embedding: np.ndarray
    label: str


def remap_label(label: str, spec: EvalSpec) -> str:
    """Collapse a source label to 'positive' or 'negative' per the spec table."""
    try:
        return spec.remap[label]
    except KeyError:
        raise EvalSchemaError(
            f"label {label!r} not in benchmark {spec.name!r} label space"
        ) from None


def masked_predict(model: StudentModel, x: np.ndarray) -> str:
    """Binary prediction with the neutral output masked; ties go positive."""
    p = model.forward_batch(np.asarray(x, dtype=np.float64))
    return "positive" if p[POSITIVE] >= p[NEGATIVE] else "negative"


def masked_predict_batch(model: StudentModel, X: np.ndarray) -> list[str]:
    P = model.forward_batch(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    return ["positive" if row[POSITIVE] >= row[NEGATIVE] else "negative" for row in P]


def accuracy(preds: list[str], labels: list[str]) -> float:
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(labels)} labels")
    if not preds:
        raise ValueError("accuracy undefined on empty input")
    return sum(p == l for p, l in zip(preds, labels)) / len(preds)


def kfold_splits(ids: list, k: int = 5, seed: int = 0) -> list[tuple[list, list]]:
    """Seeded shuffle then contiguous partition; larger folds come first."""
    if len(ids) < k:
        raise ValueError(f"need at least {k} ids, got {len(ids)}")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    base, rem = divmod(len(ids), k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < rem else 0)
        folds.append(order[start : start + size])
        start += size
    splits = []
    for i in range(k):
        test = folds[i]
        train = [x for j, fold in enumerate(folds) if j != i for x in fold]
        splits.append((train, test))
    return splits


def random_splits_80_5_15(
    ids: list, n_repeats: int = 5, seed: int = 0
) -> list[tuple[list, list, list]]:
    """Repeated seeded shuffles cut at floor(0.80 M) / floor(0.05 M) / remainder."""
    if len(ids) < 20:
        raise ValueError(f"need at least 20 ids, got {len(ids)}")
    n = len(ids)
    n_train = int(0.80 * n)
    n_val = int(0.05 * n)
    splits = []
    for repeat in range(n_repeats):
        rng = np.random.default_rng(seed + repeat)
        order = [ids[i] for i in rng.permutation(n)]
        splits.append(
            (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
        )
    return splits


@dataclass
class SplitResult:
    split: int
    accuracy: float
    n_test: int


@dataclass
class EvalResult:
    benchmark: str
    fine_tune: bool
    mean: float
    std: float
    per_split: list[SplitResult]

    def format_mean_std(self) -> str:
        """Accuracy as percent, e.g. '92.4±2.0'."""
        return f"{100 * self.mean:.1f}±{100 * self.std:.1f}"

    def to_json_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "fine_tune": self.fine_tune,
            "mean": self.mean,
            "std": self.std,
            "per_split": [
                {"split": r.split, "accuracy": r.accuracy, "n_test": r.n_test}
                for r in self.per_split
            ],
        }


def _binary_target(polarity: str) -> np.ndarray:
    target = np.zeros(N_CLASSES)
    target[POSITIVE if polarity == "positive" else NEGATIVE] = 1.0
    return target


def _fine_tune(
    model: StudentModel,
    train_data: list[LabeledSample],
    val_data: list[LabeledSample] | None,
    spec: EvalSpec,
    config: TrainConfig,
    seed: int,
) -> StudentModel:
    """Continue training on one-hot binary targets; the neutral logit column
    stays frozen. Selection: best val accuracy when a val split exists,
    otherwise the final epoch."""
    samples = [
        TrainingSample(
            embedding=np.asarray(s.embedding, dtype=np.float64),
            teacher_dist=_binary_target(remap_label(s.label, spec)),
            multiplier=1,
            argmax_class=POSITIVE if remap_label(s.label, spec) == "positive" else NEGATIVE,
        )
        for s in train_data
    ]
    X = np.stack([s.embedding for s in samples])
    G = np.stack([s.teacher_dist for s in samples])
    if val_data:
        Xv = np.stack([np.asarray(s.embedding, dtype=np.float64) for s in val_data])
        yv = [remap_label(s.label, spec) for s in val_data]

    state = AdamState.for_model(model)
    rng = np.random.default_rng(seed)
    best = model.copy()
    best_acc = -1.0
    since_improved = 0
    for _epoch in range(config.max_epochs):
        order = rng.permutation(len(samples))
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = _loss_and_grads(model, X[idx], G[idx], np.ones(len(idx)))
            grads["W2"][:, NEUTRAL] = 0.0
            grads["b2"][NEUTRAL] = 0.0
            adam_step(model, grads, state, config)
        if val_data:
            acc = accuracy(masked_predict_batch(model, Xv), yv)
            if acc > best_acc:
                best_acc = acc
                best = model.copy()
                since_improved = 0
            else:
                since_improved += 1
                if since_improved >= config.patience:
                    break
    return best if val_data else model


def evaluate(
    model: StudentModel,
    spec: EvalSpec,
    data: list[LabeledSample],
    fine_tune: bool = False,
    train_config: TrainConfig | None = None,
) -> EvalResult:
    """Run the benchmark protocol and report mean/std accuracy over splits.

    Zero-shot (``fine_tune=False``) applies the model as-is to every test
    split and never mutates it. Fine-tuning copies the model per split,
    continues training on the split's train set, and selects by validation
    accuracy where the protocol provides a val set (random 80/5/15) or takes
    the final epoch (5-fold).
    """
    by_id = {s.id: s for s in data}
    if len(by_id) != len(data):
        raise EvalSchemaError("benchmark sample ids must be unique")
    for s in data:
        remap_label(s.label, spec)  # validates the whole file up front
    ids = [s.id for s in data]

    if spec.split_protocol == "kfold5":
        raw_splits = [(train, None, test) for train, test in kfold_splits(ids, 5, spec.seed)]
    else:
        raw_splits = random_splits_80_5_15(ids, spec.n_repeats, spec.seed)

    config = train_config or TrainConfig()
    per_split = []
    for i, (train_ids, val_ids, test_ids) in enumerate(raw_splits):
        test = [by_id[x] for x in test_ids]
        if fine_tune:
            split_model = _fine_tune(
                model.copy(),
                [by_id[x] for x in train_ids],
                [by_id[x] for x in val_ids] if val_ids else None,
                spec,
                config,
                seed=spec.seed + i,
            )
        else:
            split_model = model
        preds = masked_predict_batch(split_model, np.stack([s.embedding for s in test]))
        labels = [remap_label(s.label, spec) for s in test]
        per_split.append(SplitResult(split=i, accuracy=accuracy(preds, labels), n_test=len(test)))

    accs = np.array([r.accuracy for r in per_split])
    return EvalResult(
        benchmark=spec.name,
        fine_tune=fine_tune,
        mean=float(accs.mean()),
        std=float(accs.std()),  # population std over splits
        per_split=per_split,
    )


def load_benchmark(path: str | Path, expected_dim: int | None = None) -> list[LabeledSample]:
    """Read benchmark items from JSON-Lines {"id", "label", "embedding"}."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                sid, label, emb = obj["id"], obj["label"], obj["embedding"]
            except (TypeError, KeyError):
                raise EvalSchemaError(
                    f"{path}, line {line_no}: expected fields id/label/embedding"
                )
            emb = np.asarray(emb, dtype=np.float64)
            if expected_dim is not None and emb.shape != (expected_dim,):
                raise EvalSchemaError(
                    f"{path}, line {line_no}: embedding dimension {emb.shape[0]}, "
                    f"expected {expected_dim}"
                )
            out.append(LabeledSample(id=sid, embedding=emb, label=label))
    return out


def load_eval_spec(path: str | Path) -> tuple[EvalSpec, Path]:
    """Read a benchmark spec JSON; returns the spec and its data file path.

    The ``data`` field is resolved relative to the spec file's directory.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        spec = EvalSpec(
            name=doc["name"],
            label_space=doc["label_space"],
            remap=doc.get("remap") or {},
            split_protocol=doc["split_protocol"],
            n_repeats=int(doc.get("n_repeats", 5)),
            seed=int(doc.get("seed", 0)),
        )
        data = doc["data"]
    except KeyError as exc:
        raise EvalSchemaError(f"{path}: missing field {exc.args[0]!r}") from None
    data_path = Path(data)
    if not data_path.is_absolute():
        data_path = path.parent / data_path
    return spec, data_path
