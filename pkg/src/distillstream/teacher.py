"""Frozen textual sentiment teacher and the confidence gate.

The teacher maps a text to a categorical distribution over the fixed class
order (positive, neutral, negative). Two providers are shipped: a
deterministic lexicon scorer (desk-scale stand-in for a pretrained model) and
a precomputed table for anyone with real teacher outputs. Providers are
immutable after construction; ``state_hash`` lets callers verify the teacher
stayed frozen across a training run.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .corpus import word_tokens, normalized_tokens

CLASS_ORDER = ("positive", "neutral", "negative")
POSITIVE, NEUTRAL, NEGATIVE = 0, 1, 2
N_CLASSES = 3

# Damping applied to the neutral raw score of the lexicon rule.
NEUTRAL_DAMPING = 0.25

_SIMPLEX_TOL = 1e-9


class TeacherLookupError(KeyError):
    """A precomputed provider has no entry for the requested key."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self):
        return f"precomputed teacher has no entry for key {self.key!r}"


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax over the last axis."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    """Log-probabilities via the log-sum-exp formulation."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass(frozen=True)
class SentimentDistribution:
    """Point on the 3-class probability simplex, ordered (pos, neu, neg)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.shape != (N_CLASSES,):
            raise ValueError(f"expected {N_CLASSES} components, got shape {p.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError(f"components must lie in [0, 1], got {p}")
        if abs(float(p.sum()) - 1.0) > _SIMPLEX_TOL:
            raise ValueError(f"components must sum to 1, got {p.sum()!r}")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @property
    def argmax_class(self) -> int:
        """Most probable class; ties break to the lowest index."""
        return int(np.argmax(self.p))

    def as_tuple(self) -> tuple[float, float, float]:
        return (float(self.p[0]), float(self.p[1]), float(self.p[2]))


@dataclass(frozen=True)
class GatingConfig:
    """Per-class confidence thresholds, ordered (positive, neutral, negative)."""

    c: tuple[float, float, float] = (0.90, 0.90, 0.70)

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if len(c) != N_CLASSES:
            raise ValueError("need one threshold per class")
        if any(not 0.0 <= v <= 1.0 for v in c):
            raise ValueError(f"thresholds must lie in [0, 1], got {c}")
        object.__setattr__(self, "c", c)


@dataclass(frozen=True)
class GateResult:
    multiplier: int  # 0 or 1
    argmax_class: int


def gate(dist: SentimentDistribution | np.ndarray, config: GatingConfig) -> GateResult:
    """Hard confidence gate: multiplier 1 iff the argmax probability meets its threshold."""
    p = dist.p if isinstance(dist, SentimentDistribution) else np.asarray(dist, dtype=np.float64)
    k = int(np.argmax(p))
    return GateResult(multiplier=int(p[k] >= config.c[k]), argmax_class=k)


class LexiconScorer:
    """Word-list sentiment scorer.

    With P positive hits, G negative hits and W whitespace words, the raw
    scores are (P, max(0, W - P - G) * 0.25, G) / temperature, pushed through
    a softmax. Hits are counted over lowercased, punctuation-stripped tokens.
    """

    def __init__(self, pos_words, neg_words, temperature: float = 1.0):
        self.pos_words = frozenset(w.lower() for w in pos_words)
        self.neg_words = frozenset(w.lower() for w in neg_words)
        if self.pos_words & self.neg_words:
            clash = sorted(self.pos_words & self.neg_words)[:5]
            raise ValueError(f"lexicons must be disjoint, both contain {clash}")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.temperature = float(temperature)

    def score(self, text: str) -> SentimentDistribution:
        tokens = normalized_tokens(text)
        pos_hits = sum(1 for t in tokens if t in self.pos_words)
        neg_hits = sum(1 for t in tokens if t in self.neg_words)
        n_words = len(word_tokens(text))
        raw = np.array(
            [
                pos_hits,
                max(0, n_words - pos_hits - neg_hits) * NEUTRAL_DAMPING,
                neg_hits,
            ],
            dtype=np.float64,
        )
        return SentimentDistribution(softmax(raw / self.temperature))

    def state_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr(sorted(self.pos_words)).encode())
        h.update(repr(sorted(self.neg_words)).encode())
        h.update(repr(self.temperature).encode())
        return h.hexdigest()


class PrecomputedTeacher:
    """Distribution table keyed by record id or raw text."""

    def __init__(self, table: dict[str, SentimentDistribution]):
        self._table = dict(table)

    def __contains__(self, key: str) -> bool:
        return key in self._table

    def score(self, key: str) -> SentimentDistribution:
        try:
            return self._table[key]
        except KeyError:
            raise TeacherLookupError(key) from None

    def state_hash(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self._table):
            h.update(key.encode())
            h.update(repr(self._table[key].as_tuple()).encode())
        return h.hexdigest()


TeacherProvider = Union[LexiconScorer, PrecomputedTeacher]


def score(provider: TeacherProvider, text: str) -> SentimentDistribution:
    """Scores a text (lexicon) or looks up a key (precomputed table)."""
    return provider.score(text)


def state_hash(provider: TeacherProvider) -> str:
    return provider.state_hash()


def load_lexicon(path: str | Path) -> frozenset[str]:
    """Read a plain-text lexicon, one word per line; blank lines ignored."""
    words = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def load_precomputed(path: str | Path) -> PrecomputedTeacher:
    """Read a JSON-Lines distribution table: {"id": str, "p": [pos, neu, neg]}."""
    table: dict[str, SentimentDistribution] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            try:
                key, p = obj["id"], obj["p"]
            except (TypeError, KeyError):
                raise ValueError(f"{path}, line {line_no}: expected fields 'id' and 'p'")
            table[key] = SentimentDistribution(np.asarray(p, dtype=np.float64))
    return PrecomputedTeacher(table)
