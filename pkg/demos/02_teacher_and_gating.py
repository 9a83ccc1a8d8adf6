"""The frozen textual teacher and the per-class confidence gate.

Scores a handful of texts with the lexicon teacher, shows the resulting
3-class distributions over (positive, neutral, negative), and demonstrates
how per-class confidence thresholds zero out low-confidence samples.

    python demos/02_teacher_and_gating.py
"""

import numpy as np

from distillstream import CLASS_ORDER, GatingConfig, LexiconScorer, gate
from distillstream.synthetic import DEMO_NEG_WORDS, DEMO_POS_WORDS

scorer = LexiconScorer(DEMO_POS_WORDS, DEMO_NEG_WORDS)

texts = [
    "what a wonderful happy great day with the family",
    "good day at the office",
    "the train to the station was on time this morning",
    "the report is on the table in the office by the window",
    "awful terrible horrible day i am broken",
    "bad day at the office",
]

print("teacher distributions (positive, neutral, negative):")
for text in texts:
    dist = scorer.score(text)
    marks = " ".join(f"{p:.3f}" for p in dist.p)
    print(f"  [{marks}] argmax={CLASS_ORDER[dist.argmax_class]:8s} {text!r}")

# --- Confidence gating ------------------------------------------------------
# multiplier = 1 iff the argmax probability reaches that class's threshold;
# a gated-out sample contributes exactly zero loss and zero gradient.
print("\ngating at different thresholds:")
for thresholds in [(0.0, 0.0, 0.0), (0.70, 0.70, 0.70), (0.90, 0.90, 0.70)]:
    config = GatingConfig(thresholds)
    kept = []
    for text in texts:
        result = gate(scorer.score(text), config)
        kept.append(result.multiplier)
    print(f"  c={thresholds}: multipliers={kept}  kept {sum(kept)}/{len(texts)}")

# --- Monotonicity -----------------------------------------------------------
# Raising any threshold can only shrink the gated set.
rng = np.random.default_rng(0)
points = rng.dirichlet(np.ones(3), size=5000)
for lo, hi in [((0.5, 0.5, 0.5), (0.8, 0.5, 0.5)), ((0.6, 0.6, 0.6), (0.9, 0.9, 0.9))]:
    kept_lo = sum(gate(p, GatingConfig(lo)).multiplier for p in points)
    kept_hi = sum(gate(p, GatingConfig(hi)).multiplier for p in points)
    print(f"\n5000 random simplex points: kept {kept_lo} at c={lo}, "
          f"{kept_hi} at c={hi} (never more)")
    assert kept_hi <= kept_lo
