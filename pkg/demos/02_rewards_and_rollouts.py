"""
Rollouts, answer checking, and group advantages
===============================================

A candidate entry earns reward 1 only when the frozen executor answers
correctly *and* the entry is structurally complete.  This demo runs a
scripted executor on a steering bench, extracts and compares answers,
and turns a group of rewards into the standardized advantages that
drive the policy update.
"""

import numpy as np

from seamforge import (
    answers_equal,
    aggregate_rewards,
    compute_advantages,
    compute_reward,
    extract_answer,
    parse_experience,
)
from seamforge import toybench

# ---------------------------------------------------------------------------
# Answer extraction handles both executor output styles.

think_style = "<think>2*2 - 1*1 = 3</think><answer>3</answer>"
boxed_style = r"The determinant works out to \boxed{\frac{6}{2}}."
print("tagged:", extract_answer(think_style, "think-answer-tags"))
print("boxed: ", extract_answer(boxed_style, "boxed"))

# Equivalence is literal-normalizing, not symbolic: numeric forms and
# simple fraction notation agree, algebra does not.
for a, b in [("3.0", "3"), ("1/2", "2/4"), ("x+1", "x + 1")]:
    print(f"answers_equal({a!r}, {b!r}) ->", answers_equal(a, b))

# ---------------------------------------------------------------------------
# The toy bench: a scripted executor that solves the instance exactly
# when the entry is complete and highlights the decomposition keyword.

instance = toybench.toy_dataset(1)[0]
executor = toybench.toy_executor()

steered = parse_experience(
    toybench.ANALYSIS_FRAGMENT
    + toybench.KEYWORD_EXPERIENCE_FRAGMENT
    + toybench.EXAMPLE_FRAGMENT
)
unsteered = parse_experience("<analysis>no highlights, no plan</analysis>")

for label, entry in [("steered", steered), ("unsteered", unsteered)]:
    rollout = executor.solve(instance, entry)[0]
    reward = compute_reward(rollout, entry, instance)
    print(
        f"{label:9s} answer={rollout.extracted_answer!r} "
        f"latency={rollout.latency_seconds:.4f}s reward={reward}"
    )

# ---------------------------------------------------------------------------
# M rollouts per candidate average into one scalar; a group of K such
# scalars standardizes into advantages (population std, stabilizer delta).

per_candidate = [
    aggregate_rewards([1.0, 1.0]),
    aggregate_rewards([1.0, 0.0]),
    aggregate_rewards([0.0, 0.0]),
    aggregate_rewards([0.0, 0.0]),
]
print("\nmean rewards:", per_candidate)

adv = compute_advantages(per_candidate, delta=1e-4)
print("advantages:  ", np.round(adv.values, 4))
print("group mean:  ", adv.group_mean, "| group std:", round(adv.group_std, 6))
print("sum to zero: ", abs(adv.values.sum()) < 1e-12)
