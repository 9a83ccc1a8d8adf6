"""Seeded synthetic corpus and benchmark generators for desk-scale runs.

Records get a latent class; the text plants matching lexicon words and the
image embeddings point along a per-class axis, so the text teacher and a
linear student can both recover the class. Every embedding mixes the class
axis with a per-image random direction: distinct images stay far below any
realistic duplicate threshold (cosine around 0.4 within a class) while
planted duplicates are exact copies or perturbations verified to keep cosine
at 0.999 or above against their source.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import ImageItem, MultimodalRecord, write_corpus
from .dedup import cosine
from .evaluation import EvalSpec, LabeledSample, default_remap
from .teacher import CLASS_ORDER

# Embedding mixture weights: class axis vs per-image identity direction.
CLASS_AXIS_WEIGHT = 0.6
IDENTITY_WEIGHT = 0.8
NEAR_DUP_MIN_COSINE = 0.999

DEMO_POS_WORDS = (
    "good", "great", "happy", "love", "lovely", "wonderful", "amazing",
    "beautiful", "awesome", "excellent", "fantastic", "delightful", "joyful",
    "bright", "superb", "charming", "winning", "fun", "sweet", "brilliant",
)
DEMO_NEG_WORDS = (
    "bad", "awful", "sad", "hate", "terrible", "horrible", "angry", "ugly",
    "nasty", "dreadful", "gloomy", "painful", "losing", "broken", "miserable",
    "disgusting", "annoying", "bitter", "dark", "ruined",
)
_NEUTRAL_NOUNS = (
    "report", "window", "table", "street", "market", "office", "paper",
    "road", "train", "station", "coffee", "morning", "city", "building",
    "river", "garden", "door", "phone", "screen", "update",
)
_FILLER = (
    "the", "of", "and", "to", "in", "it", "is", "was", "for", "on", "that",
    "with", "as", "at", "by", "this", "we", "you", "they", "so", "about",
    "into", "over", "after", "from", "there", "then",
)

_JUNK_KINDS = ("short_text", "retweet", "no_image")


@dataclass(frozen=True)
class SyntheticSpec:
    n_records: int = 1000
    dup_rate: float = 0.2
    noise_sigma: float = 0.05
    class_priors: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    seed: int = 0
    dim: int = 48
    multi_image_fraction: float = 0.0
    junk_fraction: float = 0.0

    def __post_init__(self):
        if self.n_records < 1:
            raise ValueError("n_records must be positive")
        if not 0.0 <= self.dup_rate < 1.0:
            raise ValueError("dup_rate must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        priors = np.asarray(self.class_priors, dtype=np.float64)
        if priors.shape != (3,) or np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ValueError("class_priors must be a 3-point probability vector")
        if self.dim < 4:
            raise ValueError("dim must be at least 4")
        if not 0.0 <= self.multi_image_fraction <= 1.0:
            raise ValueError("multi_image_fraction must lie in [0, 1]")
        if not 0.0 <= self.junk_fraction < 1.0:
            raise ValueError("junk_fraction must lie in [0, 1)")

    def to_json_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "dup_rate": self.dup_rate,
            "noise_sigma": self.noise_sigma,
            "class_priors": list(self.class_priors),
            "seed": self.seed,
            "dim": self.dim,
            "multi_image_fraction": self.multi_image_fraction,
            "junk_fraction": self.junk_fraction,
        }


def _class_text(rng: np.random.Generator, class_idx: int) -> str:
    if class_idx == 0:
        hits = rng.integers(2, 8)
        fill = rng.integers(4, 9)
        words = list(rng.choice(DEMO_POS_WORDS, hits)) + list(rng.choice(_FILLER, fill))
    elif class_idx == 2:
        hits = rng.integers(2, 8)
        fill = rng.integers(4, 9)
        words = list(rng.choice(DEMO_NEG_WORDS, hits)) + list(rng.choice(_FILLER, fill))
    else:
        fill = rng.integers(9, 17)
        nouns = rng.integers(2, 5)
        words = list(rng.choice(_FILLER, fill)) + list(rng.choice(_NEUTRAL_NOUNS, nouns))
    order = rng.permutation(len(words))
    return " ".join(words[i] for i in order)


def _short_text(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 4))
    return " ".join(rng.choice(_NEUTRAL_NOUNS, n))


def _base_embedding(rng: np.random.Generator, class_idx: int, spec: SyntheticSpec) -> np.ndarray:
    axis = np.zeros(spec.dim)
    axis[class_idx] = 1.0
    ident = rng.standard_normal(spec.dim)
    ident /= np.linalg.norm(ident)
    vec = (
        CLASS_AXIS_WEIGHT * axis
        + IDENTITY_WEIGHT * ident
        + spec.noise_sigma * rng.standard_normal(spec.dim)
    )
    return vec.astype(np.float32)


def _near_duplicate(rng: np.random.Generator, source: np.ndarray) -> np.ndarray:
    """Perturb until the float32 result still exceeds the near-dup cosine floor."""
    direction = rng.standard_normal(source.shape[0])
    delta = 0.003
    while True:
        cand = (source.astype(np.float64) + delta * direction).astype(np.float32)
        if cosine(cand, source) >= NEAR_DUP_MIN_COSINE:
            return cand
        delta /= 2.0


def gen_synthetic(
    spec: SyntheticSpec,
    corpus_path: str | Path,
    truth_path: str | Path,
) -> dict:
    """Write a synthetic corpus plus its ground-truth file; returns the truth dict.

    Duplicate planting targets ``round(dup_rate * n_images)`` images at
    seeded-random positions, split about evenly between exact copies and
    verified near-duplicates of earlier same-class base images; the count
    actually planted is recorded in the truth file. Only admissible records
    host planted duplicates.
    """
    rng = np.random.default_rng(spec.seed)
    classes = rng.choice(3, size=spec.n_records, p=np.asarray(spec.class_priors))

    junk_kinds: list[str | None] = []
    for _ in range(spec.n_records):
        if spec.junk_fraction > 0 and rng.random() < spec.junk_fraction:
            junk_kinds.append(_JUNK_KINDS[rng.integers(len(_JUNK_KINDS))])
        else:
            junk_kinds.append(None)

    image_counts = []
    for junk in junk_kinds:
        if junk == "no_image":
            image_counts.append(0)
        elif spec.multi_image_fraction > 0 and rng.random() < spec.multi_image_fraction:
            image_counts.append(2)
        else:
            image_counts.append(1)

    # Global image slots over admissible records, in stream order.
    slots = [
        (rec_idx, img_idx)
        for rec_idx in range(spec.n_records)
        if junk_kinds[rec_idx] is None
        for img_idx in range(image_counts[rec_idx])
    ]
    n_images = len(slots)
    target_dups = int(round(spec.dup_rate * n_images))
    if target_dups > max(0, n_images - 1):
        raise ValueError("dup_rate too high for the number of admissible images")

    # Duplicates copy an earlier base image of the *same* class, so every
    # image genuinely depicts its record's latent class. Positions are drawn
    # sequentially with probability dups_left/positions_left, which plants
    # exactly the target count unless a class never accumulates a base.
    embeddings: dict[tuple[int, int], np.ndarray] = {}
    image_meta: dict[tuple[int, int], dict] = {}
    bases_by_class: dict[int, list[tuple[int, int]]] = {0: [], 1: [], 2: []}
    dups_left = target_dups
    planted = 0
    for pos, (rec_idx, img_idx) in enumerate(slots):
        image_id = f"img{rec_idx:05d}_{img_idx}"
        cls = int(classes[rec_idx])
        sources = bases_by_class[cls]
        plant = (
            dups_left > 0
            and sources
            and rng.random() < dups_left / (n_images - pos)
        )
        if plant:
            src_slot = sources[rng.integers(len(sources))]
            src_id = image_meta[src_slot]["image_id"]
            if rng.random() < 0.5:
                emb = embeddings[src_slot].copy()
                kind = "exact_dup"
            else:
                emb = _near_duplicate(rng, embeddings[src_slot])
                kind = "near_dup"
            image_meta[(rec_idx, img_idx)] = {
                "image_id": image_id, "kind": kind, "duplicate_of": src_id,
            }
            dups_left -= 1
            planted += 1
        else:
            emb = _base_embedding(rng, cls, spec)
            bases_by_class[cls].append((rec_idx, img_idx))
            image_meta[(rec_idx, img_idx)] = {
                "image_id": image_id, "kind": "base", "duplicate_of": None,
            }
        embeddings[(rec_idx, img_idx)] = emb

    records = []
    truth_records = []
    base_time = 1_650_000_000
    for rec_idx in range(spec.n_records):
        junk = junk_kinds[rec_idx]
        rec_id = f"rec{rec_idx:05d}"
        if junk == "short_text":
            text = _short_text(rng)
        else:
            text = _class_text(rng, classes[rec_idx])
        items = []
        for img_idx in range(image_counts[rec_idx]):
            # Junk records outside the slot list still need embeddings.
            key = (rec_idx, img_idx)
            if key not in embeddings:
                embeddings[key] = _base_embedding(rng, classes[rec_idx], spec)
                image_meta[key] = {
                    "image_id": f"img{rec_idx:05d}_{img_idx}",
                    "kind": "base", "duplicate_of": None,
                }
            items.append(ImageItem(image_meta[key]["image_id"], embeddings[key]))
        records.append(
            MultimodalRecord(
                id=rec_id,
                text=text,
                is_retweet=junk == "retweet",
                created_at=base_time + rec_idx,
                images=tuple(items),
            )
        )
        truth_records.append(
            {
                "id": rec_id,
                "class": CLASS_ORDER[classes[rec_idx]],
                "admissible": junk is None,
                "junk_kind": junk,
                "images": [
                    image_meta[(rec_idx, img_idx)]
                    for img_idx in range(image_counts[rec_idx])
                ],
            }
        )

    write_corpus(corpus_path, records)
    truth = {
        "generator": spec.to_json_dict(),
        "n_records": spec.n_records,
        "n_admissible_records": sum(1 for j in junk_kinds if j is None),
        "n_admissible_images": n_images,
        "planted_duplicates": planted,
        "records": truth_records,
    }
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(truth, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return truth


def write_lexicons(pos_path: str | Path, neg_path: str | Path) -> None:
    """Write the built-in demo lexicons, one word per line."""
    Path(pos_path).write_text("\n".join(DEMO_POS_WORDS) + "\n", encoding="utf-8")
    Path(neg_path).write_text("\n".join(DEMO_NEG_WORDS) + "\n", encoding="utf-8")


def gen_synthetic_benchmark(
    n_items: int,
    label_space: str = "binary_polarity",
    *,
    name: str = "synthetic",
    split_protocol: str = "kfold5",
    n_repeats: int = 5,
    seed: int = 0,
    dim: int = 48,
    noise_sigma: float = 0.05,
) -> tuple[list[LabeledSample], EvalSpec]:
    """Balanced benchmark whose labels are linearly decodable from embeddings.

    Items use the same embedding geometry as the synthetic corpus, so a
    student distilled on a matching corpus transfers zero-shot.
    """
    if n_items < 2:
        raise ValueError("n_items must be at least 2")
    rng = np.random.default_rng(seed)
    remap = default_remap(label_space)
    by_polarity = {"positive": [], "negative": []}
    for label, polarity in remap.items():
        by_polarity[polarity].append(label)

    polarities = np.array(["positive", "negative"])[
        rng.permutation(np.arange(n_items) % 2)
    ]
    samples = []
    for i, polarity in enumerate(polarities):
        class_idx = 0 if polarity == "positive" else 2
        axis = np.zeros(dim)
        axis[class_idx] = 1.0
        ident = rng.standard_normal(dim)
        ident /= np.linalg.norm(ident)
        emb = (
            CLASS_AXIS_WEIGHT * axis
            + IDENTITY_WEIGHT * ident
            + noise_sigma * rng.standard_normal(dim)
        ).astype(np.float32)
        choices = by_polarity[polarity]
        label = choices[rng.integers(len(choices))]
        samples.append(
            LabeledSample(
                id=f"bench{i:05d}",
                embedding=emb.astype(np.float64),
                label=label,
            )
        )
    spec = EvalSpec(
        name=name,
        label_space=label_space,
        split_protocol=split_protocol,
        n_repeats=n_repeats,
        seed=seed,
    )
    return samples, spec


def write_benchmark(
    samples: list[LabeledSample],
    spec: EvalSpec,
    data_path: str | Path,
    spec_path: str | Path,
) -> None:
    """Write benchmark items as JSON-Lines plus the spec JSON referencing them."""
    data_path = Path(data_path)
    with open(data_path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {
                        "id": s.id,
                        "label": s.label,
                        "embedding": [float(v) for v in s.embedding],
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    doc = {
        "name": spec.name,
        "label_space": spec.label_space,
        "remap": spec.remap,
        "split_protocol": spec.split_protocol,
        "n_repeats": spec.n_repeats,
        "seed": spec.seed,
        "data": data_path.name,
    }
    with open(spec_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
