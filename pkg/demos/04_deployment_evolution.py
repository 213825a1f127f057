"""
Deployment-time evolution from logged successes
===============================================

After deployment the policy keeps improving without rollout rewards:
streamed instances that the executor solves land in a success buffer,
and periodic teacher-forced fine-tuning replays those (instance, entry)
pairs.  This demo streams a 40-instance toy set, inspects the buffer,
and compares held-out accuracy before and after the refit.
"""

import json
import tempfile
from pathlib import Path

from seamforge import EvolutionProtocol, run_evolution
from seamforge import toybench

# ---------------------------------------------------------------------------
# Protocol: 30% of the data streams, the rest is held out for the
# before/after comparison.  Successes are deduplicated and capped.

protocol = EvolutionProtocol(
    stream_fraction=0.3,
    max_rounds=10,
    buffer_cap=100,
    sft_steps=500,
    micro_batch=8,
    sft_learning_rate=0.02,
)

buffer_path = Path(tempfile.mkdtemp(prefix="evolution-")) / "buffer.jsonl"
summary = run_evolution(
    protocol,
    toybench.toy_dataset(40),
    toybench.toy_policy(seed=0),
    toybench.toy_executor(),
    seed=0,
    buffer_path=buffer_path,
)

print(f"stream/held-out split: {summary.stream_size}/{summary.eval_size}")
print(f"rounds run:            {summary.rounds_run}")
print(f"successes logged:      {summary.buffer_size}")
print(f"refit steps:           {summary.sft_steps_run}")
print(f"final refit loss:      {summary.final_sft_loss:.4f}")
print(f"held-out accuracy:     {summary.pre_accuracy:.3f} -> {summary.post_accuracy:.3f}")

# ---------------------------------------------------------------------------
# The buffer persists as JSON lines (with a checksummed sidecar index);
# every record carries full reward by construction.

records = [json.loads(line) for line in buffer_path.read_text().splitlines()]
print(f"\nbuffer file holds {len(records)} records, all reward",
      {r["reward_value"] for r in records})
first = records[0]
print("first success:", first["instance_id"])
print(first["entry_raw_text"].rstrip())
