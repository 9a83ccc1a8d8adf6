"""End-to-end orchestration: filter -> dedup -> label -> train -> eval.

Stages communicate through on-disk JSON/JSON-Lines artifacts inside the run's
output directory, so any stage can be re-run or inspected in isolation and an
ablation over gating grids reuses the filtered/deduplicated cache. A manifest
records the config hash, per-stage counts in the per-class bookkeeping shape,
artifact paths, and wall-clock timings; everything except the timing section
is byte-reproducible for a fixed config and seed.

Runs are configured by a single TOML file; ``--set section.key=value``
overrides individual entries and the DISTILLSTREAM_OUT environment variable
overrides the output directory.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .corpus import (
    CorpusError,
    FilterPolicy,
    ImageItem,
    IngestStats,
    admit,
    load_corpus,
)
from .dedup import DedupConfig, RetainedSet
from .evaluation import (
    EvalSchemaError,
    evaluate,
    load_benchmark,
    load_eval_spec,
)
from .student import load_checkpoint, save_checkpoint
from .teacher import (
    CLASS_ORDER,
    GatingConfig,
    LexiconScorer,
    TeacherLookupError,
    TeacherProvider,
    gate,
    load_lexicon,
    load_precomputed,
    state_hash,
)
from .training import (
    TrainConfig,
    TrainingSample,
    ZeroGatedSamplesError,
    class_breakdown_table,
    train_from_samples,
)

EXIT_OK = 0
EXIT_CODES = {
    "config": 2,
    "ingest": 3,
    "dedup": 4,
    "label": 5,
    "train": 6,
    "eval": 7,
}

ARTIFACTS = {
    "pairs": "pairs.jsonl",
    "ingest_report": "ingest_report.json",
    "retained_pairs": "retained_pairs.jsonl",
    "dedup_report": "dedup_report.json",
    "samples": "samples.jsonl",
    "label_report": "label_report.json",
    "checkpoint": "checkpoint.json",
    "train_report": "train_report.json",
    "eval_results": "eval_results.json",
    "manifest": "manifest.json",
    "manifest_text": "manifest.txt",
}

STAGE_ORDER = ("ingest", "dedup", "label", "train", "eval")


class StageError(Exception):
    """A pipeline stage failed; carries the stage name and a stable exit code."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = EXIT_CODES.get(stage, 1)


@dataclass
class RunConfig:
    corpus: Path
    out_dir: Path
    lexicon_pos: Path | None
    lexicon_neg: Path | None
    teacher_file: Path | None
    embedding_dim: int
    on_malformed: str
    embeddings_path: Path | None
    embeddings_index: Path | None
    filter_policy: FilterPolicy
    dedup: DedupConfig
    train: TrainConfig
    eval_specs: list[Path]
    eval_fine_tune: bool
    seed: int
    threads: int
    verbose: bool
    raw: dict

    @property
    def gating(self) -> GatingConfig:
        return self.train.gating

    def artifact(self, name: str) -> Path:
        return self.out_dir / ARTIFACTS[name]


def _parse_set_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply --set section.key=value entries to a parsed config dict."""
    for item in overrides:
        if "=" not in item:
            raise StageError("config", f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise StageError("config", f"--set key {key!r} crosses a non-table entry")
        node[parts[-1]] = _parse_set_value(value.strip())
    return doc


def _canonical_config(doc: dict) -> dict:
    """Config identity: everything except output location and runner knobs."""
    doc = json.loads(json.dumps(doc))  # deep copy, JSON-typed
    doc.get("paths", {}).pop("out_dir", None)
    doc.pop("threads", None)
    doc.pop("verbose", None)
    return doc


def config_hash(doc: dict) -> str:
    canon = json.dumps(_canonical_config(doc), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_run_config(
    path: str | Path,
    *,
    overrides: list[str] | None = None,
    seed: int | None = None,
    threads: int | None = None,
    verbose: bool = False,
) -> RunConfig:
    """Parse a TOML run config. Input paths resolve relative to the config
    file; the output directory resolves relative to the working directory."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise StageError("config", f"config file {path} does not exist") from None
    except tomllib.TOMLDecodeError as exc:
        raise StageError("config", f"{path}: {exc}") from None
    doc = apply_overrides(doc, list(overrides or ()))
    if seed is not None:
        doc["seed"] = seed
    if threads is not None:
        doc["threads"] = threads

    base = path.parent

    def in_path(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    try:
        paths = doc.get("paths", {})
        corpus = in_path(paths["corpus"])
        out_dir = Path(os.environ.get("DISTILLSTREAM_OUT") or paths.get("out_dir", "run_out"))
        lexicon_pos = in_path(paths["lexicon_pos"]) if "lexicon_pos" in paths else None
        lexicon_neg = in_path(paths["lexicon_neg"]) if "lexicon_neg" in paths else None
        teacher_file = in_path(paths["teacher"]) if "teacher" in paths else None

        corpus_sec = doc.get("corpus", {})
        embedding_dim = int(corpus_sec["embedding_dim"])
        on_malformed = corpus_sec.get("on_malformed", "skip")
        embeddings_path = (
            in_path(corpus_sec["embeddings"]) if "embeddings" in corpus_sec else None
        )
        embeddings_index = (
            in_path(corpus_sec["embeddings_index"])
            if "embeddings_index" in corpus_sec else None
        )

        filt = doc.get("filter", {})
        policy = FilterPolicy(
            min_words=int(filt.get("min_words", 5)),
            require_image=bool(filt.get("require_image", True)),
            reject_retweets=bool(filt.get("reject_retweets", True)),
            english_stopword_ratio_min=float(filt.get("english_stopword_ratio_min", 0.12)),
        )

        top_seed = int(doc.get("seed", 0))
        ded = doc.get("dedup", {})
        dedup = DedupConfig(
            tau=float(ded.get("tau", 0.98875)),
            index_kind=ded.get("index", "exact"),
            lsh_planes=int(ded.get("lsh_planes", 16)),
            lsh_tables=int(ded.get("lsh_tables", 8)),
            seed=int(ded.get("seed", top_seed)),
        )

        gat = doc.get("gating", {})
        gating = GatingConfig(tuple(gat.get("thresholds", (0.90, 0.90, 0.70))))

        tr = doc.get("train", {})
        train = TrainConfig(
            lr=float(tr.get("lr", 1e-4)),
            adam_eps=float(tr.get("adam_eps", 1e-7)),
            adam_beta1=float(tr.get("adam_beta1", 0.9)),
            adam_beta2=float(tr.get("adam_beta2", 0.999)),
            batch_size=int(tr.get("batch_size", 64)),
            max_epochs=int(tr.get("max_epochs", 50)),
            patience=int(tr.get("patience", 5)),
            seed=int(tr.get("seed", top_seed)),
            gating=gating,
            feature_noise_sigma=float(tr.get("feature_noise_sigma", 0.0)),
            architecture=tr.get("architecture", "linear"),
            hidden=int(tr.get("hidden", 64)),
            holdout_fraction=float(tr.get("holdout_fraction", 0.1)),
            hard_labels=bool(tr.get("hard_labels", False)),
        )

        ev = doc.get("eval", {})
        eval_specs = [in_path(p) for p in ev.get("specs", [])]
        eval_fine_tune = bool(ev.get("fine_tune", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise StageError("config", f"{path}: invalid config ({exc})") from None

    if teacher_file is None and (lexicon_pos is None or lexicon_neg is None):
        raise StageError(
            "config", "config needs either paths.teacher or both paths.lexicon_pos/neg"
        )
    return RunConfig(
        corpus=corpus,
        out_dir=out_dir,
        lexicon_pos=lexicon_pos,
        lexicon_neg=lexicon_neg,
        teacher_file=teacher_file,
        embedding_dim=embedding_dim,
        on_malformed=on_malformed,
        embeddings_path=embeddings_path,
        embeddings_index=embeddings_index,
        filter_policy=policy,
        dedup=dedup,
        train=train,
        eval_specs=eval_specs,
        eval_fine_tune=eval_fine_tune,
        seed=top_seed,
        threads=int(doc.get("threads", 1)),
        verbose=verbose or bool(doc.get("verbose", False)),
        raw=doc,
    )


def validate_input_paths(config: RunConfig, *, need_eval: bool = True) -> None:
    checks = [("corpus", config.corpus)]
    if config.teacher_file is not None:
        checks.append(("teacher", config.teacher_file))
    else:
        checks.append(("lexicon_pos", config.lexicon_pos))
        checks.append(("lexicon_neg", config.lexicon_neg))
    if need_eval:
        checks.extend(("eval spec", p) for p in config.eval_specs)
    for label, p in checks:
        if p is None or not Path(p).exists():
            raise StageError("config", f"{label} path {p} does not exist")


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _read_json(path: Path, stage: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise StageError(
            stage, f"missing input artifact {path.name}; run the earlier stages first"
        ) from None


def _iter_jsonl(path: Path, stage: str):
    try:
        fh = open(path, "r", encoding="utf-8")
    except FileNotFoundError:
        raise StageError(
            stage, f"missing input artifact {path.name}; run the earlier stages first"
        ) from None
    with fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def make_teacher(config: RunConfig) -> TeacherProvider:
    if config.teacher_file is not None:
        return load_precomputed(config.teacher_file)
    return LexiconScorer(load_lexicon(config.lexicon_pos), load_lexicon(config.lexicon_neg))


def stage_ingest(config: RunConfig) -> dict:
    """Filter the corpus and explode admitted records into ordered pairs."""
    stats = IngestStats()
    admitted_records = 0
    rejected_records = 0
    pairs = []
    try:
        for record in load_corpus(
            config.corpus,
            config.embedding_dim,
            on_malformed=config.on_malformed,
            stats=stats,
            embeddings_path=config.embeddings_path,
            index_path=config.embeddings_index,
        ):
            if not admit(record, config.filter_policy):
                rejected_records += 1
                continue
            admitted_records += 1
            for position, item in enumerate(record.images):
                pairs.append((record.created_at, record.id, position, record.text, item))
    except CorpusError as exc:
        raise StageError("ingest", str(exc)) from None

    pairs.sort(key=lambda row: (row[0], row[1], row[2]))
    config.out_dir.mkdir(parents=True, exist_ok=True)
    with open(config.artifact("pairs"), "w", encoding="utf-8") as fh:
        for created_at, rec_id, _pos, text, item in pairs:
            fh.write(
                json.dumps(
                    {
                        "record_id": rec_id,
                        "created_at": created_at,
                        "text": text,
                        "image_id": item.image_id,
                        "embedding": [float(v) for v in item.embedding],
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")
    report = {
        "lines": stats.lines,
        "parsed_records": stats.records,
        "skipped_malformed": stats.skipped,
        "malformed_lines": [{"line": n, "reason": r} for n, r in stats.errors],
        "admitted_records": admitted_records,
        "rejected_records": rejected_records,
        "admitted_pairs": len(pairs),
    }
    _write_json(config.artifact("ingest_report"), report)
    return report


def stage_dedup(config: RunConfig) -> dict:
    """Drop near-duplicate images from the admitted pair stream."""
    if not config.artifact("pairs").exists():
        raise StageError(
            "dedup", "missing input artifact pairs.jsonl; run the ingest stage first"
        )
    index = RetainedSet(config.embedding_dim, config.dedup)
    decisions = [] if config.verbose else None
    out_path = config.artifact("retained_pairs")
    try:
        with open(out_path, "w", encoding="utf-8") as out:
            for row in _iter_jsonl(config.artifact("pairs"), "dedup"):
                item = ImageItem(row["image_id"], np.asarray(row["embedding"], dtype=np.float32))
                decision = index.offer(item)
                if decisions is not None:
                    decisions.append(decision)
                if decision.retained:
                    out.write(json.dumps(row, sort_keys=True))
                    out.write("\n")
    except ValueError as exc:
        raise StageError("dedup", str(exc)) from None
    stats = index.stats
    report = {
        "seen": stats.seen,
        "retained": stats.retained,
        "dropped": stats.dropped,
        "reduction_fraction": stats.dropped / stats.seen if stats.seen else 0.0,
        "index": config.dedup.index_kind,
        "tau": config.dedup.tau,
    }
    if decisions is not None:
        report["decisions"] = [
            {"image_id": d.image_id, "action": d.action}
            | ({"duplicate_of": d.duplicate_of} if d.duplicate_of else {})
            for d in decisions
        ]
    _write_json(config.artifact("dedup_report"), report)
    return report


def stage_label(config: RunConfig) -> dict:
    """Score each record's text once with the frozen teacher and gate it."""
    provider = make_teacher(config)
    teacher_hash_before = state_hash(provider)

    def score_record(rec_id: str, text: str):
        if config.teacher_file is not None:
            key = rec_id if rec_id in provider else text
            return provider.score(key)
        return provider.score(text)

    # Pre-dedup bookkeeping: tweets and collected images per teacher class.
    tweets = {name: 0 for name in CLASS_ORDER}
    images = {name: 0 for name in CLASS_ORDER}
    dists: dict[str, tuple] = {}
    try:
        for row in _iter_jsonl(config.artifact("pairs"), "label"):
            rec_id = row["record_id"]
            if rec_id not in dists:
                dist = score_record(rec_id, row["text"])
                dists[rec_id] = dist.as_tuple()
                tweets[CLASS_ORDER[dist.argmax_class]] += 1
            name = CLASS_ORDER[int(np.argmax(dists[rec_id]))]
            images[name] += 1

        dedup_images = {name: 0 for name in CLASS_ORDER}
        gated_counts = {name: 0 for name in CLASS_ORDER}
        ungated_counts = {name: 0 for name in CLASS_ORDER}
        with open(config.artifact("samples"), "w", encoding="utf-8") as out:
            for row in _iter_jsonl(config.artifact("retained_pairs"), "label"):
                p = dists[row["record_id"]]
                result = gate(np.asarray(p), config.gating)
                name = CLASS_ORDER[result.argmax_class]
                dedup_images[name] += 1
                (gated_counts if result.multiplier else ungated_counts)[name] += 1
                out.write(
                    json.dumps(
                        {
                            "record_id": row["record_id"],
                            "image_id": row["image_id"],
                            "embedding": row["embedding"],
                            "teacher_p": list(p),
                            "multiplier": result.multiplier,
                            "argmax_class": name,
                        },
                        sort_keys=True,
                    )
                )
                out.write("\n")
    except (TeacherLookupError, KeyError) as exc:
        raise StageError("label", str(exc)) from None

    if state_hash(provider) != teacher_hash_before:
        raise StageError("label", "teacher provider mutated during scoring")
    report = {
        "teacher": "precomputed" if config.teacher_file is not None else "lexicon",
        "teacher_hash": teacher_hash_before,
        "gating": list(config.gating.c),
        "gated_counts": gated_counts,
        "ungated_counts": ungated_counts,
        "class_breakdown": class_breakdown_table(tweets, images, dedup_images),
    }
    _write_json(config.artifact("label_report"), report)
    return report


def _samples_from_artifact(config: RunConfig, gating: GatingConfig) -> list[TrainingSample]:
    """Rebuild training samples from the label artifact, re-gating from the
    stored teacher distributions so the configured thresholds always apply."""
    samples = []
    for row in _iter_jsonl(config.artifact("samples"), "train"):
        p = np.asarray(row["teacher_p"], dtype=np.float64)
        result = gate(p, gating)
        target = p
        if config.train.hard_labels:
            target = np.zeros(3)
            target[result.argmax_class] = 1.0
        samples.append(
            TrainingSample(
                embedding=np.asarray(row["embedding"], dtype=np.float64),
                teacher_dist=target,
                multiplier=result.multiplier,
                argmax_class=result.argmax_class,
            )
        )
    return samples


def stage_train(config: RunConfig) -> dict:
    samples = _samples_from_artifact(config, config.gating)
    label_report = _read_json(config.artifact("label_report"), "train")
    try:
        model, report = train_from_samples(
            samples, config.train, corpus_breakdown=label_report["class_breakdown"]
        )
    except ZeroGatedSamplesError as exc:
        raise StageError("train", str(exc)) from None
    save_checkpoint(
        model,
        config.artifact("checkpoint"),
        train_config=config.train.to_json_dict(),
        seed=config.train.seed,
    )
    doc = report.to_json_dict()
    _write_json(config.artifact("train_report"), doc)
    return doc


def stage_eval(config: RunConfig) -> dict:
    try:
        model = load_checkpoint(config.artifact("checkpoint"))
    except FileNotFoundError:
        raise StageError("eval", "missing checkpoint.json; run the train stage first") from None
    results = []
    for spec_path in config.eval_specs:
        try:
            spec, data_path = load_eval_spec(spec_path)
            data = load_benchmark(data_path, expected_dim=model.n)
            result = evaluate(
                model, spec, data,
                fine_tune=config.eval_fine_tune, train_config=config.train,
            )
        except (EvalSchemaError, OSError, ValueError) as exc:
            raise StageError("eval", f"{spec_path}: {exc}") from None
        results.append(result)
        _write_json(config.out_dir / f"eval_{spec.name}.json", result.to_json_dict())
    doc = {"fine_tune": config.eval_fine_tune,
           "benchmarks": [r.to_json_dict() for r in results]}
    _write_json(config.artifact("eval_results"), doc)
    return doc


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "dedup": stage_dedup,
    "label": stage_label,
    "train": stage_train,
    "eval": stage_eval,
}


def run_pipeline(config: RunConfig) -> dict:
    """Run all stages in order and write the manifest; raises StageError on
    the first failing stage (the manifest is still written, with the failure
    flagged and completed artifacts listed)."""
    validate_input_paths(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    stage_docs: dict[str, dict] = {}
    stage_seconds: dict[str, float] = {}
    failure: StageError | None = None
    for stage in STAGE_ORDER:
        t0 = time.perf_counter()
        try:
            stage_docs[stage] = _STAGE_FUNCS[stage](config)
        except StageError as exc:
            failure = exc
            break
        finally:
            stage_seconds[stage] = time.perf_counter() - t0

    manifest = build_manifest(config, stage_docs, failure)
    manifest["timing"] = {
        "started_at": started,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "stage_seconds": stage_seconds,
    }
    _write_json(config.artifact("manifest"), manifest)
    config.artifact("manifest_text").write_text(
        render_manifest_text(manifest), encoding="utf-8"
    )
    if failure is not None:
        raise failure
    return manifest


def build_manifest(config: RunConfig, stage_docs: dict, failure: StageError | None) -> dict:
    summary = {}
    ingest = stage_docs.get("ingest")
    dedup = stage_docs.get("dedup")
    label = stage_docs.get("label")
    train = stage_docs.get("train")
    ev = stage_docs.get("eval")
    if ingest:
        summary["admitted_records"] = ingest["admitted_records"]
        summary["admitted_pairs"] = ingest["admitted_pairs"]
    if dedup:
        summary["retained_pairs"] = dedup["retained"]
    if label:
        summary["gated_counts"] = label["gated_counts"]
        summary["gated_total"] = sum(label["gated_counts"].values())
        summary["class_breakdown"] = label["class_breakdown"]
    stages = {}
    if ingest:
        stages["ingest"] = {k: ingest[k] for k in (
            "lines", "parsed_records", "skipped_malformed",
            "admitted_records", "rejected_records", "admitted_pairs")}
    if dedup:
        stages["dedup"] = {k: dedup[k] for k in (
            "seen", "retained", "dropped", "reduction_fraction", "index", "tau")}
    if label:
        stages["label"] = {k: label[k] for k in (
            "teacher", "teacher_hash", "gating", "gated_counts", "ungated_counts")}
    if train:
        stages["train"] = {
            "epochs_run": len(train["epochs"]),
            "best_epoch": train["best_epoch"],
            "n_gated": train["n_gated"],
            "n_train": train["n_train"],
            "n_holdout": train["n_holdout"],
            "final_holdout_loss": train["final_holdout_loss"],
            "final_holdout_agreement": train["final_holdout_agreement"],
        }
    if ev:
        stages["eval"] = {
            "fine_tune": ev["fine_tune"],
            "benchmarks": [
                {k: b[k] for k in ("benchmark", "fine_tune", "mean", "std")}
                for b in ev["benchmarks"]
            ],
        }
    artifacts = {
        name: rel if (config.out_dir / rel).exists() else None
        for name, rel in ARTIFACTS.items()
        if name not in ("manifest", "manifest_text")
    }
    return {
        "version": __version__,
        "config_hash": config_hash(config.raw),
        "seed": config.seed,
        "threads": config.threads,
        "status": "failed" if failure else "ok",
        "failed_stage": failure.stage if failure else None,
        "error": str(failure) if failure else None,
        "summary": summary,
        "stages": stages,
        "artifacts": artifacts,
    }


def render_manifest_text(manifest: dict) -> str:
    """Plain-text manifest mirroring the per-class bookkeeping table."""
    lines = [
        "distillstream run manifest",
        f"version: {manifest['version']}",
        f"config_hash: {manifest['config_hash']}",
        f"seed: {manifest['seed']}",
        f"status: {manifest['status']}",
    ]
    if manifest.get("failed_stage"):
        lines.append(f"failed_stage: {manifest['failed_stage']}")
        lines.append(f"error: {manifest['error']}")
    breakdown = manifest.get("summary", {}).get("class_breakdown")
    if breakdown:
        lines.append("")
        lines.append(f"{'':12s}{'Collected':>24s}{'Deduplicated':>16s}")
        lines.append(
            f"{'Sentiment':12s}{'# tweets':>12s}{'# images':>12s}{'# images':>16s}"
        )
        for name in (*CLASS_ORDER, "total"):
            row = breakdown[name]
            lines.append(
                f"{name:12s}{row['tweets']:>12d}{row['images']:>12d}"
                f"{row['deduplicated_images']:>16d}"
            )
    gated = manifest.get("summary", {}).get("gated_counts")
    if gated:
        lines.append("")
        gates = "  ".join(f"{name}={gated[name]}" for name in CLASS_ORDER)
        lines.append(f"gated samples: {gates}  total={sum(gated.values())}")
    ev = manifest.get("stages", {}).get("eval")
    if ev:
        lines.append("")
        for bench in ev["benchmarks"]:
            tag = "fine-tuned" if bench["fine_tune"] else "zero-shot"
            lines.append(
                f"benchmark {bench['benchmark']} ({tag}): "
                f"{100 * bench['mean']:.1f}±{100 * bench['std']:.1f}"
            )
    dedup = manifest.get("stages", {}).get("dedup")
    if dedup:
        lines.append("")
        lines.append(
            f"dedup: seen={dedup['seen']} retained={dedup['retained']} "
            f"dropped={dedup['dropped']} "
            f"reduction={100 * dedup['reduction_fraction']:.1f}%"
        )
    return "\n".join(lines) + "\n"


def run_ablation(config: RunConfig, grid: list[GatingConfig]) -> dict:
    """One training run per gating config over the shared filter/dedup/label
    cache; reports gated counts, held-out teacher agreement, and zero-shot
    benchmark accuracy per grid row."""
    if not grid:
        raise StageError("config", "ablation grid must be non-empty")
    validate_input_paths(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    # Build the shared filter/dedup/label cache once.
    if not config.artifact("pairs").exists():
        stage_ingest(config)
    if not config.artifact("retained_pairs").exists():
        stage_dedup(config)
    if not config.artifact("samples").exists():
        stage_label(config)

    eval_inputs = []
    for spec_path in config.eval_specs:
        spec, data_path = load_eval_spec(spec_path)
        eval_inputs.append((spec, load_benchmark(data_path)))

    rows = []
    for gating in grid:
        train_cfg = replace(config.train, gating=gating)
        samples = _samples_from_artifact(config, gating)
        gated_counts = {name: 0 for name in CLASS_ORDER}
        for s in samples:
            if s.multiplier:
                gated_counts[CLASS_ORDER[s.argmax_class]] += 1
        try:
            model, report = train_from_samples(samples, train_cfg)
        except ZeroGatedSamplesError as exc:
            raise StageError("train", str(exc)) from None
        zero_shot = {}
        for spec, data in eval_inputs:
            result = evaluate(model, spec, data, fine_tune=False)
            zero_shot[spec.name] = {"mean": result.mean, "std": result.std}
        rows.append(
            {
                "thresholds": list(gating.c),
                "gated_counts": gated_counts,
                "gated_total": sum(gated_counts.values()),
                "holdout_agreement": report.final_holdout_agreement,
                "zero_shot": zero_shot,
            }
        )
    doc = {"rows": rows, "config_hash": config_hash(config.raw)}
    _write_json(config.out_dir / "ablation_report.json", doc)
    (config.out_dir / "ablation_report.txt").write_text(
        render_ablation_text(doc), encoding="utf-8"
    )
    return doc


def render_ablation_text(doc: dict) -> str:
    """Threshold-grid table: confidence filter columns, gated counts, accuracy."""
    bench_names = sorted(
        {name for row in doc["rows"] for name in row["zero_shot"]}
    )
    header = (
        f"{'#':>2s}  {'pos':>5s} {'neu':>5s} {'neg':>5s}  "
        f"{'gated(p/n/g)':>18s} {'total':>7s} {'agree':>7s}"
    )
    for name in bench_names:
        header += f" {name:>14s}"
    lines = [header]
    for i, row in enumerate(doc["rows"], start=1):
        c = row["thresholds"]
        g = row["gated_counts"]
        gates = f"{g['positive']}/{g['neutral']}/{g['negative']}"
        agree = row["holdout_agreement"]
        agree_s = f"{agree:.3f}" if agree is not None else "n/a"
        line = (
            f"{i:>2d}  {c[0]:>5.2f} {c[1]:>5.2f} {c[2]:>5.2f}  "
            f"{gates:>18s} {row['gated_total']:>7d} {agree_s:>7s}"
        )
        for name in bench_names:
            z = row["zero_shot"][name]
            line += f" {100 * z['mean']:>9.1f}±{100 * z['std']:.1f}"
        lines.append(line)
    return "\n".join(lines) + "\n"
