"""distillstream: label-free image sentiment classifiers via cross-modal distillation.

A textual sentiment teacher scores the text of filtered, deduplicated
multimodal records; a visual student is trained on the paired image
embeddings against those soft targets under per-class confidence gating, and
evaluated on binary polarity benchmarks with emotion remapping and neutral
masking.
"""

__version__ = "0.1.0"

from .corpus import (
    FilterPolicy,
    ImageItem,
    IngestStats,
    MultimodalRecord,
    admit,
    explode_pairs,
    load_corpus,
)
from .dedup import DedupConfig, DedupReport, RetainedSet, cosine, dedup_stream
from .evaluation import (
    EvalResult,
    EvalSpec,
    LabeledSample,
    accuracy,
    evaluate,
    kfold_splits,
    masked_predict,
    random_splits_80_5_15,
    remap_label,
)
from .student import StudentModel, forward, load_checkpoint, save_checkpoint
from .synthetic import SyntheticSpec, gen_synthetic, gen_synthetic_benchmark
from .teacher import (
    CLASS_ORDER,
    GatingConfig,
    LexiconScorer,
    PrecomputedTeacher,
    SentimentDistribution,
    gate,
    score,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainingSample,
    TrainReport,
    ZeroGatedSamplesError,
    adam_step,
    backward,
    sample_loss,
    train,
)

__all__ = [
    "__version__",
    "FilterPolicy", "ImageItem", "IngestStats", "MultimodalRecord",
    "admit", "explode_pairs", "load_corpus",
    "DedupConfig", "DedupReport", "RetainedSet", "cosine", "dedup_stream",
    "EvalResult", "EvalSpec", "LabeledSample", "accuracy", "evaluate",
    "kfold_splits", "masked_predict", "random_splits_80_5_15", "remap_label",
    "StudentModel", "forward", "load_checkpoint", "save_checkpoint",
    "SyntheticSpec", "gen_synthetic", "gen_synthetic_benchmark",
    "CLASS_ORDER", "GatingConfig", "LexiconScorer", "PrecomputedTeacher",
    "SentimentDistribution", "gate", "score",
    "AdamState", "TrainConfig", "TrainingSample", "TrainReport",
    "ZeroGatedSamplesError", "adam_step", "backward", "sample_loss", "train",
]
