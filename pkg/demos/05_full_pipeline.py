"""The whole pipeline through the orchestrator, plus a gating ablation.

Drives the bundled demo corpus through filter -> dedup -> label -> train ->
eval via the same code path as the `distillstream run` CLI, prints the
manifest's per-class bookkeeping table, and runs a small threshold-grid
ablation over the shared cache.

    python demos/05_full_pipeline.py
"""

import tempfile
from pathlib import Path

from distillstream.pipeline import (
    load_run_config,
    render_ablation_text,
    render_manifest_text,
    run_ablation,
    run_pipeline,
)
from distillstream.teacher import GatingConfig

repo = Path(__file__).resolve().parent.parent
demo_config = repo / "data" / "demo" / "config.toml"
if not demo_config.exists():
    raise SystemExit(
        "bundled demo data missing; regenerate with\n"
        "  python -m distillstream.cli gen-synthetic --out data/demo "
        "--records 200 --seed 3 --junk-fraction 0.1 --multi-image-fraction 0.25"
    )

out_dir = Path(tempfile.mkdtemp(prefix="distillstream_demo_"))
config = load_run_config(demo_config)
config.out_dir = out_dir

manifest = run_pipeline(config)
print(render_manifest_text(manifest))
print(f"artifacts in {out_dir}:")
for name, rel in manifest["artifacts"].items():
    print(f"  {name:16s} {rel}")

# --- Threshold ablation over the shared cache -------------------------------
grid = [
    GatingConfig((0.0, 0.0, 0.0)),
    GatingConfig((0.70, 0.70, 0.70)),
    GatingConfig((0.90, 0.90, 0.70)),
]
print("\nablation over gating thresholds (cache reused, one training run per row):")
report = run_ablation(config, grid)
print(render_ablation_text(report))
