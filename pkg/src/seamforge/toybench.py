"""A tiny closed-world benchmark where steering is learnable from reward alone.

The vocabulary is a handful of multi-character fragments.  Some fragment
sequences assemble into a complete experience entry whose highlights contain
the steering keyword; the scripted executor solves an instance exactly when
it receives such an entry.  A fresh random policy emits the winning sequence
rarely, so reward-driven updates have measurable headroom.
"""

from __future__ import annotations

from .executor import ExecutorConfig, ScriptedExecutor, ScriptedRule
from .policy import MicroPolicy, MicroTokenizer, PolicyRole
from .schema import STYLE_THINK_ANSWER, ExperienceEntry, ProblemInstance, parse_experience

STEERING_KEYWORD = "decompose"

ANALYSIS_FRAGMENT = "<analysis>\nwork out what the problem is really asking\n</analysis>\n"
KEYWORD_EXPERIENCE_FRAGMENT = (
    "<experience>\n• decompose the problem into smaller parts\n</experience>\n"
)
PLAIN_EXPERIENCE_FRAGMENT = (
    "<experience>\n• try whatever comes to mind first\n</experience>\n"
)
EXAMPLE_FRAGMENT = (
    "<example>\n1. restate the goal\n2. carry out the plan\n3. check the result\n</example>\n"
)
NOISE_FRAGMENTS = (
    "hmm, let me think.\n",
    "that seems hard.\n",
    "maybe another angle.\n",
)


def toy_tokenizer() -> MicroTokenizer:
    fragments = (
        ANALYSIS_FRAGMENT,
        KEYWORD_EXPERIENCE_FRAGMENT,
        PLAIN_EXPERIENCE_FRAGMENT,
        EXAMPLE_FRAGMENT,
        *NOISE_FRAGMENTS,
    )
    return MicroTokenizer(fragments)


def toy_policy(
    seed: int = 0,
    *,
    max_new_tokens: int = 6,
    embed_dim: int = 8,
    hidden_dim: int = 24,
    role: PolicyRole = PolicyRole.TRAINABLE,
) -> MicroPolicy:
    from .policy import MicroLMConfig

    tokenizer = toy_tokenizer()
    config = MicroLMConfig(
        vocab_size=tokenizer.vocab_size,
        embed_dim=embed_dim,
        hidden_dim=hidden_dim,
    )
    return MicroPolicy(
        tokenizer,
        config=config,
        role=role,
        max_new_tokens=max_new_tokens,
        seed=seed,
    )


def _steered(instance: ProblemInstance, entry: ExperienceEntry) -> bool:
    from .schema import check_completeness

    if not check_completeness(entry).complete:
        return False
    return any(STEERING_KEYWORD in item for item in entry.highlights)


def keyword_steering_rules() -> tuple[ScriptedRule, ...]:
    """Solve exactly when the entry is complete and a highlight says to decompose."""
    return (ScriptedRule(_steered, lambda instance, entry: instance.target),)


def toy_executor(
    *,
    prompt_style: str = STYLE_THINK_ANSWER,
    rollouts_per_candidate: int = 1,
    miss_answer: str = "no idea",
    fixed_latency: float | None = None,
) -> ScriptedExecutor:
    config = ExecutorConfig(
        prompt_style=prompt_style,
        rollouts_per_candidate=rollouts_per_candidate,
    )
    return ScriptedExecutor(
        keyword_steering_rules(),
        config,
        miss_answer=miss_answer,
        fixed_latency=fixed_latency,
    )


def toy_dataset(n: int, *, prefix: str = "toy", target: str = "42") -> tuple[ProblemInstance, ...]:
    return tuple(
        ProblemInstance(
            id=f"{prefix}-{i:03d}",
            statement=f"Puzzle {i}: reduce the expression to a single number.",
            target=target,
        )
        for i in range(n)
    )


def varied_toy_dataset(
    n: int, *, prefix: str = "vtoy", target: str = "42"
) -> tuple[ProblemInstance, ...]:
    """Instances whose statements embed different vocabulary fragments.

    Plain ``toy_dataset`` statements all tokenize to a single unknown marker,
    so every instance presents the policy with an identical prompt.  Here each
    statement carries one in-vocabulary fragment, giving per-instance context
    variety — useful when a benchmark should reward generalizing across
    prompts instead of memorizing one.
    """
    flavors = (
        ANALYSIS_FRAGMENT,
        PLAIN_EXPERIENCE_FRAGMENT,
        EXAMPLE_FRAGMENT,
        *NOISE_FRAGMENTS,
    )
    return tuple(
        ProblemInstance(
            id=f"{prefix}-{i:03d}",
            statement=(
                f"Puzzle {i}: {flavors[i % len(flavors)]}"
                "reduce the expression to a single number."
            ),
            target=target,
        )
        for i in range(n)
    )


def steered_probability(
    policy: MicroPolicy,
    instance: ProblemInstance,
    *,
    samples: int = 1000,
    temperature: float = 1.0,
    seed: int = 0,
) -> float:
    """Monte-Carlo estimate of how often the policy emits a steering entry."""
    from .schema import render_seam_prompt

    prompt = render_seam_prompt(instance)
    sequences = policy.sample_candidates(
        prompt, samples, temperature=temperature, seed=seed
    )
    hits = 0
    for seq in sequences:
        entry = parse_experience(seq.text, token_count=len(seq.tokens))
        if _steered(instance, entry):
            hits += 1
    return hits / samples
