"""
Training the guidance policy on the toy bench
=============================================

Forward exploration samples K candidate entries per instance, the
scripted executor scores them, and the clipped group-relative update
moves the micro-LM toward entries that steer the executor.  Training is
fully seeded: the same seed reproduces the same metric stream bit for
bit.
"""

import tempfile
from pathlib import Path

from seamforge import MicroPolicy, TrainConfig, train
from seamforge import toybench

# ---------------------------------------------------------------------------
# One instance batch, K=8 candidates, binary rollout reward.

instances = toybench.toy_dataset(8)
policy = toybench.toy_policy(seed=0)
executor = toybench.toy_executor()

probe = instances[0]
before = toybench.steered_probability(policy, probe, samples=500, seed=9)
print(f"P(steering entry) before training: {before:.3f}")

run_dir = Path(tempfile.mkdtemp(prefix="toy-train-"))
config = TrainConfig(
    seed=0,
    epochs=80,  # 8 instances / batch 8 -> one update per epoch
    batch_size=8,
    k_candidates=8,
    m_rollouts=1,
    learning_rate=0.05,
    clip_eps=0.2,
    beta=0.001,
    delta=1e-4,
    checkpoint_dir=str(run_dir / "checkpoints"),
)
summary = train(config, policy, executor, instances=instances, run_dir=run_dir)

print(f"updates run: {summary.updates}")
print(f"final loss:  {summary.final_loss:+.6f}")
print(f"final mean reward: {summary.final_mean_reward:.3f}")

after = toybench.steered_probability(policy, probe, samples=500, seed=9)
print(f"P(steering entry) after training:  {after:.3f}")

# ---------------------------------------------------------------------------
# The metric stream is a list of flat dict rows; every run directory also
# holds them as metrics.jsonl next to the trace log and checkpoints.

print("\nstep  mean_reward  loss")
for row in summary.metrics[::16] + (summary.metrics[-1],):
    print(f"{row['step']:4d}  {row['mean_reward']:11.3f}  {row['loss']:+.6f}")
print("\nrun artifacts:", sorted(p.name for p in run_dir.iterdir()))

# ---------------------------------------------------------------------------
# Checkpoints restore bit-exactly, including optimizer state.

reloaded = MicroPolicy.load_checkpoint(summary.checkpoint_path)
same = all(
    (reloaded.params[key] == policy.params[key]).all() for key in policy.params
)
print("checkpoint round trip bit-exact:", same)
