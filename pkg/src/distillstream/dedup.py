"""Streaming near-duplicate removal over image embeddings.

An image is dropped when its cosine similarity against any previously
*retained* image exceeds the threshold ``tau``; comparisons never involve
previously dropped images, so retention is greedy and first-wins. Embeddings
are unit-normalized on insertion, turning every similarity into a dot
product.

Two candidate indexes are available: ``exact`` scans the whole retained set,
``lsh`` generates candidates by sign-random-projection hashing and verifies
each candidate with an exact cosine, so it can never drop an item without a
genuine witness (it may only miss drops the exact index would make).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .corpus import ImageItem

_NORM_TOL = 1e-6


@dataclass(frozen=True)
class DedupConfig:
    tau: float = 0.98875
    index_kind: str = "exact"  # "exact" | "lsh"
    lsh_planes: int = 16
    lsh_tables: int = 8
    seed: int = 0

    def __post_init__(self):
        if not -1.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (-1, 1]")
        if self.index_kind not in ("exact", "lsh"):
            raise ValueError(f"unknown index kind {self.index_kind!r}")
        if self.lsh_planes < 1 or self.lsh_tables < 1:
            raise ValueError("lsh_planes and lsh_tables must be positive")


@dataclass(frozen=True)
class Decision:
    image_id: str
    action: str  # "retained" | "dropped"
    duplicate_of: str | None = None

    @property
    def retained(self) -> bool:
        return self.action == "retained"


@dataclass
class DedupStats:
    seen: int = 0
    retained: int = 0
    dropped: int = 0


@dataclass
class DedupReport:
    """Counters plus (optionally) the per-item decision trail."""

    seen: int
    retained: int
    dropped: int
    reduction_fraction: float
    decisions: list[Decision] | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "seen": self.seen,
            "retained": self.retained,
            "dropped": self.dropped,
            "reduction_fraction": self.reduction_fraction,
        }
        if self.decisions is not None:
            doc["decisions"] = [
                {"image_id": d.image_id, "action": d.action}
                | ({"duplicate_of": d.duplicate_of} if d.duplicate_of else {})
                for d in self.decisions
            ]
        return doc


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against float overshoot."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm input")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


class RetainedSet:
    """Append-only set of unit-normalized embeddings with a duplicate index.

    Single-writer: ``offer`` mutates internal state and must not be called
    concurrently.
    """

    def __init__(self, dim: int, config: DedupConfig | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.config = config or DedupConfig()
        self.ids: list[str] = []
        self.stats = DedupStats()
        self._rows = np.empty((0, dim), dtype=np.float64)
        self._n = 0
        if self.config.index_kind == "lsh":
            rng = np.random.default_rng(self.config.seed)
            self._planes = rng.standard_normal(
                (self.config.lsh_tables, self.config.lsh_planes, dim)
            )
            self._buckets: list[dict[int, list[int]]] = [
                {} for _ in range(self.config.lsh_tables)
            ]

    def __len__(self) -> int:
        return self._n

    @property
    def entries(self) -> np.ndarray:
        """Unit-normalized retained embeddings, in retention order."""
        return self._rows[: self._n]

    def _signatures(self, unit: np.ndarray) -> list[int]:
        bits = (self._planes @ unit) >= 0.0  # (tables, planes)
        weights = 1 << np.arange(self.config.lsh_planes)
        return [int(np.dot(row, weights)) for row in bits]

    def _candidates(self, unit: np.ndarray) -> np.ndarray:
        if self.config.index_kind == "exact":
            return np.arange(self._n)
        found: set[int] = set()
        for table, key in enumerate(self._signatures(unit)):
            found.update(self._buckets[table].get(key, ()))
        return np.array(sorted(found), dtype=np.intp)

    def _append(self, image_id: str, unit: np.ndarray) -> None:
        if self._n == len(self._rows):
            grown = np.empty((max(256, 2 * len(self._rows)), self.dim), dtype=np.float64)
            grown[: self._n] = self._rows[: self._n]
            self._rows = grown
        self._rows[self._n] = unit
        if self.config.index_kind == "lsh":
            for table, key in enumerate(self._signatures(unit)):
                self._buckets[table].setdefault(key, []).append(self._n)
        self.ids.append(image_id)
        self._n += 1

    def offer(self, item: ImageItem) -> Decision:
        """Retain the item unless a retained entry exceeds tau against it.

        When dropping, the witness is the earliest-retained matching entry.
        """
        if item.dim != self.dim:
            raise ValueError(
                f"image {item.image_id!r} has dimension {item.dim}, index holds {self.dim}"
            )
        vec = np.asarray(item.embedding, dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise ValueError(f"image {item.image_id!r} has zero-norm embedding")
        unit = vec / norm

        self.stats.seen += 1
        cand = self._candidates(unit)
        if cand.size:
            sims = self._rows[cand] @ unit
            hits = np.flatnonzero(sims > self.config.tau)
            if hits.size:
                witness = int(cand[hits[0]])  # candidates sorted -> earliest retained
                self.stats.dropped += 1
                return Decision(item.image_id, "dropped", duplicate_of=self.ids[witness])
        self._append(item.image_id, unit)
        self.stats.retained += 1
        return Decision(item.image_id, "retained")


def dedup_stream(
    pairs: Iterable[tuple[str, ImageItem]],
    config: DedupConfig | None = None,
    *,
    collect_decisions: bool = False,
) -> tuple[list[tuple[str, ImageItem]], DedupReport]:
    """Filter a (text, image) pair stream down to first-seen near-unique images.

    The input must already be ordered by (created_at, id, image position);
    output pairs keep that order. Returns the retained pairs and a report.
    """
    config = config or DedupConfig()
    retained_pairs: list[tuple[str, ImageItem]] = []
    decisions: list[Decision] | None = [] if collect_decisions else None
    index: RetainedSet | None = None
    for text, item in pairs:
        if index is None:
            index = RetainedSet(item.dim, config)
        decision = index.offer(item)
        if decision.retained:
            retained_pairs.append((text, item))
        if decisions is not None:
            decisions.append(decision)
    stats = index.stats if index is not None else DedupStats()
    reduction = stats.dropped / stats.seen if stats.seen else 0.0
    report = DedupReport(
        seen=stats.seen,
        retained=stats.retained,
        dropped=stats.dropped,
        reduction_fraction=reduction,
        decisions=decisions,
    )
    return retained_pairs, report
