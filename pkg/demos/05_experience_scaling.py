"""
Accuracy as a function of experience-set size
=============================================

How much training data does the guidance policy need?  The scaling
sweep trains fresh policies on nested subsets of a pool (every smaller
subset is a prefix of the larger ones, per seed) and evaluates each on
a fixed held-out set.  Reports emit deterministically as JSON, CSV, and
a PNG curve.
"""

import tempfile
from pathlib import Path

import numpy as np

from seamforge import TrainConfig, emit_report, scaling_sweep
from seamforge import toybench

# ---------------------------------------------------------------------------
# A 64-instance pool with varied phrasings, 12 held-out instances, and
# three subset sizes.  Size 0 anchors the curve at the untrained policy.

config = TrainConfig(
    epochs=5,
    batch_size=8,
    k_candidates=8,
    m_rollouts=1,
    learning_rate=0.05,
)

report = scaling_sweep(
    toybench.varied_toy_dataset(64),
    [0, 16, 64],
    config,
    toybench.varied_toy_dataset(12, prefix="heldout"),
    toybench.toy_executor(),
    seeds=(0, 1),
    policy_factory=lambda seed: toybench.toy_policy(seed=seed),
)

print("size  seed  accuracy")
for point in report.points:
    print(f"{point.experience_size:4d}  {point.seed:4d}  {point.accuracy:.3f}")

means = {
    size: float(np.mean([p.accuracy for p in report.points if p.experience_size == size]))
    for size in report.sizes
}
print("\nmean accuracy by size:", means)

# ---------------------------------------------------------------------------
# Emission is deterministic: same report, same bytes.

out_dir = Path(tempfile.mkdtemp(prefix="scaling-"))
written = emit_report(report, out_dir, formats=("json", "csv", "plot"))
for path in written:
    print("wrote", path)
