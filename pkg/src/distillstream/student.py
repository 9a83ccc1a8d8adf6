"""Student classifier over image embeddings: linear or one-hidden-layer softmax.

Parameters are float64 numpy arrays kept in a name -> array dict so the
optimizer and checkpoint code can treat every architecture uniformly.
Checkpoints are JSON documents holding flattened parameters plus enough
metadata to rebuild the model exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .teacher import CLASS_ORDER, N_CLASSES, SentimentDistribution, softmax

ARCHITECTURES = ("linear", "mlp1")


@dataclass
class StudentModel:
    architecture: str
    n: int
    h: int | None
    params: dict[str, np.ndarray]

    @classmethod
    def create(
        cls, architecture: str, n: int, hidden: int = 64, seed: int = 0
    ) -> "StudentModel":
        """Fresh model. Linear starts at zero (convex problem); mlp1 uses
        seeded He-scaled Gaussian init for both layers."""
        if architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {architecture!r}")
        if n <= 0:
            raise ValueError("embedding dimension must be positive")
        if architecture == "linear":
            params = {
                "W2": np.zeros((n, N_CLASSES)),
                "b2": np.zeros(N_CLASSES),
            }
            return cls(architecture="linear", n=n, h=None, params=params)
        if hidden <= 0:
            raise ValueError("hidden width must be positive")
        rng = np.random.default_rng(seed)
        params = {
            "W1": rng.standard_normal((n, hidden)) * np.sqrt(2.0 / n),
            "b1": np.zeros(hidden),
            "W2": rng.standard_normal((hidden, N_CLASSES)) * np.sqrt(2.0 / hidden),
            "b2": np.zeros(N_CLASSES),
        }
        return cls(architecture="mlp1", n=n, h=hidden, params=params)

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Raw class scores for one embedding (n,) or a batch (m, n)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected embedding dimension {self.n}, got {x.shape[-1]}")
        if self.architecture == "mlp1":
            x = np.maximum(x @ self.params["W1"] + self.params["b1"], 0.0)
        return x @ self.params["W2"] + self.params["b2"]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, stabilized softmax over the logits."""
        return softmax(self.logits(x))

    def predict_classes(self, x: np.ndarray) -> np.ndarray:
        """Argmax class indices for a batch (m, n) -> (m,)."""
        return np.argmax(self.logits(np.atleast_2d(x)), axis=-1)

    def copy(self) -> "StudentModel":
        return StudentModel(
            architecture=self.architecture,
            n=self.n,
            h=self.h,
            params={k: v.copy() for k, v in self.params.items()},
        )

    def params_hash(self) -> str:
        """Digest of all parameter bytes; bit-level change detector."""
        h = hashlib.sha256()
        for name in sorted(self.params):
            arr = self.params[name]
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def forward(model: StudentModel, x: np.ndarray) -> SentimentDistribution:
    """Single-embedding forward pass as a validated distribution."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes a single embedding vector")
    return SentimentDistribution(model.forward_batch(x))


def save_checkpoint(
    model: StudentModel,
    path: str | Path,
    *,
    train_config: dict | None = None,
    seed: int | None = None,
) -> None:
    doc = {
        "architecture": model.architecture,
        "n": model.n,
        "h": model.h,
        "class_order": list(CLASS_ORDER),
        "params": {
            name: {
                "data": [float(v) for v in arr.ravel()],
                "shape": list(arr.shape),
            }
            for name, arr in sorted(model.params.items())
        },
        "train_config": train_config or {},
        "seed": seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_checkpoint(path: str | Path) -> StudentModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if list(doc.get("class_order", [])) != list(CLASS_ORDER):
        raise ValueError(f"checkpoint class order {doc.get('class_order')} unsupported")
    params = {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    return StudentModel(
        architecture=doc["architecture"], n=int(doc["n"]),
        h=None if doc.get("h") is None else int(doc["h"]),
        params=params,
    )
