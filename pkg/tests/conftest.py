import json
from pathlib import Path

import numpy as np
import pytest

from distillstream.corpus import ImageItem, MultimodalRecord
from distillstream.synthetic import SyntheticSpec, gen_synthetic

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"

# Frozen generator settings for the bundled corpora. The acceptance corpus
# backs the dedup-oracle and end-to-end distillation criteria; the demo
# corpus backs the golden manifest counts.
ACCEPTANCE_SPEC = SyntheticSpec(
    n_records=1000, dup_rate=0.2, noise_sigma=0.05, seed=1
)
DEMO_SPEC = SyntheticSpec(
    n_records=200, dup_rate=0.2, noise_sigma=0.05, seed=3,
    multi_image_fraction=0.25, junk_fraction=0.1,
)


def make_record(
    rec_id="r1",
    text="this is a very good day",
    n_images=1,
    dim=4,
    is_retweet=False,
    created_at=1_650_000_000,
    seed=0,
):
    rng = np.random.default_rng(seed)
    images = tuple(
        ImageItem(f"{rec_id}_img{i}", rng.standard_normal(dim).astype(np.float32))
        for i in range(n_images)
    )
    return MultimodalRecord(
        id=rec_id, text=text, is_retweet=is_retweet,
        created_at=created_at, images=images,
    )


@pytest.fixture(scope="session")
def acceptance_corpus(tmp_path_factory):
    """Paths to the bundled 1000-record corpus; regenerated if not committed."""
    corpus = DATA_DIR / "acceptance" / "corpus.jsonl"
    truth = DATA_DIR / "acceptance" / "truth.json"
    if corpus.exists() and truth.exists():
        return corpus, truth
    out = tmp_path_factory.mktemp("acceptance")
    gen_synthetic(ACCEPTANCE_SPEC, out / "corpus.jsonl", out / "truth.json")
    return out / "corpus.jsonl", out / "truth.json"


@pytest.fixture(scope="session")
def acceptance_truth(acceptance_corpus):
    with open(acceptance_corpus[1], "r", encoding="utf-8") as fh:
        return json.load(fh)
