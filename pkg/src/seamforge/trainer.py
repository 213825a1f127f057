"""Reward-driven training loop for the guidance policy.

Each update walks three steps over a batch of problem instances: snapshot the
behavior policy and sample K candidate entries per instance, roll every
candidate out through the frozen executor to earn binary rewards, then apply
one clipped-surrogate update with a KL anchor to the pre-training reference.
The executor is never trained; all learning pressure flows through the
guidance text.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, IngestionError, RoleError, TrainingError
from .executor import ExecutorConfig, ExecutorRollout, run_parallel, validate_executor_config
from .grpo import (
    DEFAULT_CLIP_EPS,
    DEFAULT_KL_BETA,
    DEFAULT_STD_DELTA,
    RATIO_LEVELS,
    GroupBatch,
    compute_advantages,
    exact_kl_terms,
    grpo_loss_grads,
)
from .policy import OPTIMIZERS, MicroPolicy, PolicyRole
from .reward import aggregate_rewards, compute_reward
from .rewardlog import GroupTrace, TraceStore
from .schema import ExperienceEntry, ProblemInstance, parse_experience, render_seam_prompt

logger = logging.getLogger(__name__)

KL_MODES = ("sampled", "exact")

METRIC_KEYS = (
    "step",
    "loss",
    "surrogate",
    "kl",
    "clip_fraction",
    "mean_reward",
    "group_reward_histogram",
)


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs, mirroring the flat config-file keys."""

    dataset: str = ""
    seed: int = 0
    epochs: int = 10
    batch_size: int = 128
    k_candidates: int = 8
    m_rollouts: int = 1
    learning_rate: float = 1e-6
    optimizer: str = "adam"
    clip_eps: float = DEFAULT_CLIP_EPS
    beta: float = DEFAULT_KL_BETA
    delta: float = DEFAULT_STD_DELTA
    ratio_level: str = "token"
    kl_mode: str = "sampled"
    accumulate_batches: int = 1
    seam_temperature: float = 1.0
    seam_max_prompt_tokens: int = 2048
    seam_max_response_tokens: int = 4096
    executor_max_prompt_tokens: int = 5120
    executor_max_response_tokens: int = 8192
    checkpoint_dir: str | None = None
    checkpoint_interval: int = 0
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)


@dataclass(frozen=True)
class TrainSummary:
    steps: int
    updates: int
    epochs: int
    final_loss: float
    final_mean_reward: float
    metrics: tuple[dict, ...]
    metrics_path: Path | None
    traces_path: Path | None
    checkpoint_path: Path | None


def validate_train_config(config: TrainConfig) -> list[str]:
    """All violations at once, each naming the offending key."""
    problems: list[str] = []
    if config.k_candidates < 2:
        problems.append("k_candidates must be >= 2")
    if config.m_rollouts < 1:
        problems.append("m_rollouts must be >= 1")
    if config.epochs < 1:
        problems.append("epochs must be >= 1")
    if config.batch_size < 1:
        problems.append("batch_size must be >= 1")
    if config.learning_rate <= 0:
        problems.append("learning_rate must be positive")
    if config.optimizer not in OPTIMIZERS:
        problems.append(f"optimizer must be one of {sorted(OPTIMIZERS)}")
    if not 0 < config.clip_eps < 1:
        problems.append("clip_eps must be in (0, 1)")
    if config.beta < 0:
        problems.append("beta must be nonnegative")
    if config.delta <= 0:
        problems.append("delta must be positive")
    if config.ratio_level not in RATIO_LEVELS:
        problems.append(f"ratio_level must be one of {RATIO_LEVELS}")
    if config.kl_mode not in KL_MODES:
        problems.append(f"kl_mode must be one of {KL_MODES}")
    if config.accumulate_batches < 1:
        problems.append("accumulate_batches must be >= 1")
    if config.seam_temperature <= 0:
        problems.append("seam_temperature must be positive")
    for key in (
        "seam_max_prompt_tokens",
        "seam_max_response_tokens",
        "executor_max_prompt_tokens",
        "executor_max_response_tokens",
    ):
        if getattr(config, key) < 1:
            problems.append(f"{key} must be positive")
    if config.checkpoint_interval < 0:
        problems.append("checkpoint_interval must be >= 0")
    problems.extend(validate_executor_config(config.executor))
    return problems


def ingest_dataset(path: str | Path) -> tuple[ProblemInstance, ...]:
    """Load a JSON-lines dataset of {id, problem, answer} records."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read dataset {path}: {exc}") from exc
    instances: list[ProblemInstance] = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise IngestionError(f"{path}:{line_no}: not valid JSON ({exc})") from exc
        if not isinstance(record, dict):
            raise IngestionError(f"{path}:{line_no}: record must be a JSON object")
        for key in ("id", "problem", "answer"):
            if key not in record:
                raise IngestionError(f"{path}:{line_no}: missing field '{key}'")
        instance_id = record["id"]
        if not isinstance(instance_id, (str, int)):
            raise IngestionError(f"{path}:{line_no}: 'id' must be a string or integer")
        instance_id = str(instance_id)
        if instance_id in seen:
            raise IngestionError(
                f"{path}:{line_no}: duplicate id {instance_id!r} (first seen at line {seen[instance_id]})"
            )
        seen[instance_id] = line_no
        problem = record["problem"]
        if not isinstance(problem, str) or not problem.strip():
            raise IngestionError(f"{path}:{line_no}: 'problem' must be a non-empty string")
        answer = record["answer"]
        if isinstance(answer, (int, float)):
            answer = repr(answer)
        if not isinstance(answer, str):
            raise IngestionError(f"{path}:{line_no}: 'answer' must be a string or number")
        domain = record.get("domain")
        if domain is not None and not isinstance(domain, str):
            raise IngestionError(f"{path}:{line_no}: 'domain' must be a string when present")
        instances.append(
            ProblemInstance(id=instance_id, statement=problem, target=answer, domain_tag=domain)
        )
    if not instances:
        raise IngestionError(f"dataset {path} has no instances")
    return tuple(instances)


def generate(
    policy: MicroPolicy,
    instance: ProblemInstance,
    *,
    max_prompt_tokens: int | None = None,
) -> ExperienceEntry:
    """One greedy entry for an instance (deterministic for fixed parameters)."""
    prompt = render_seam_prompt(instance)
    [sequence] = policy.sample_candidates(
        prompt, 1, temperature=0.0, seed=0, max_prompt_tokens=max_prompt_tokens
    )
    return parse_experience(sequence.text, token_count=len(sequence.tokens))


def _instance_seed(run_seed: int, step: int, instance_id: str) -> int:
    tag = zlib.crc32(instance_id.encode("utf-8"))
    state = np.random.SeedSequence((run_seed, step, tag)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _reward_histogram(mean_rewards: Sequence[float]) -> dict[str, int]:
    histogram: dict[str, int] = {}
    for value in sorted(mean_rewards):
        histogram[f"{value:.4f}"] = histogram.get(f"{value:.4f}", 0) + 1
    return histogram


def _dump_diagnostics(run_dir: Path | None, payload: dict) -> Path | None:
    if run_dir is None:
        return None
    path = run_dir / "diagnostics.json"
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    except OSError:
        logger.exception("could not write diagnostics to %s", path)
        return None
    return path


@dataclass(frozen=True)
class _GroupResult:
    """Everything one instance's candidate group contributes to a batch."""

    grads: dict[str, np.ndarray]
    trace: GroupTrace
    loss: float
    surrogate: float
    kl: float
    clip_fraction: float
    mean_rewards: tuple[float, ...]


def _process_group(
    config: TrainConfig,
    policy: MicroPolicy,
    old: MicroPolicy,
    reference: MicroPolicy,
    executor,
    instance: ProblemInstance,
    step: int,
) -> _GroupResult:
    prompt = render_seam_prompt(instance)
    sequences = old.sample_candidates(
        prompt,
        config.k_candidates,
        temperature=config.seam_temperature,
        seed=_instance_seed(config.seed, step, instance.id),
        max_prompt_tokens=config.seam_max_prompt_tokens,
    )
    entries = [
        parse_experience(seq.text, token_count=len(seq.tokens)) for seq in sequences
    ]

    def _solve(entry: ExperienceEntry) -> list[ExecutorRollout]:
        return executor.solve(instance, entry)

    rollouts = run_parallel(_solve, entries, config.executor.parallelism)
    reward_rows = [
        tuple(compute_reward(r, entry, instance) for r in candidate_rollouts)
        for entry, candidate_rollouts in zip(entries, rollouts)
    ]
    mean_rewards = [aggregate_rewards(row) for row in reward_rows]
    advantages = compute_advantages(mean_rewards, config.delta)

    logp_old = tuple(seq.logprobs for seq in sequences)
    scored = [
        policy.score_with_vjp(
            prompt,
            seq.tokens,
            temperature=config.seam_temperature,
            max_prompt_tokens=config.seam_max_prompt_tokens,
        )
        for seq in sequences
    ]
    logp_new = tuple(logps for logps, _ in scored)
    logp_ref = tuple(
        reference.score_sequence(prompt, seq.tokens, temperature=config.seam_temperature)
        for seq in sequences
    )
    group = GroupBatch(advantages, logp_new, logp_old, logp_ref)

    kl_values = None
    kl_dlogits: list[np.ndarray] | None = None
    if config.kl_mode == "exact":
        kl_values = []
        kl_dlogits = []
        for seq in sequences:
            dist_new = policy.score_distributions(
                prompt, seq.tokens, temperature=config.seam_temperature
            )
            dist_ref = reference.score_distributions(
                prompt, seq.tokens, temperature=config.seam_temperature
            )
            kl, dlogits = exact_kl_terms(dist_new, dist_ref)
            kl_values.append(kl)
            kl_dlogits.append(dlogits)
    stats, dlogp_grads = grpo_loss_grads(
        group,
        clip_eps=config.clip_eps,
        beta=config.beta,
        ratio_level=config.ratio_level,
        kl_values=kl_values,
    )
    if not math.isfinite(stats.loss):
        raise TrainingError(
            f"non-finite loss {stats.loss!r} for instance {instance.id!r} at step {step}"
        )

    k = config.k_candidates
    grads: dict[str, np.ndarray] = {}
    for j, (_, vjp) in enumerate(scored):
        dlogits = None
        if kl_dlogits is not None:
            dlogits = (config.beta / k) * kl_dlogits[j]
        for key, value in vjp(dlogp_grads[j], dlogits).items():
            if key in grads:
                grads[key] += value
            else:
                grads[key] = value

    trace = GroupTrace(
        instance_id=instance.id,
        step=step,
        candidate_texts=tuple(seq.text for seq in sequences),
        candidate_token_counts=tuple(len(seq.tokens) for seq in sequences),
        rollout_rewards=tuple(reward_rows),
        mean_rewards=tuple(mean_rewards),
        advantages=tuple(float(a) for a in advantages.values),
        delta=config.delta,
        loss_stats=asdict(stats),
    )
    return _GroupResult(
        grads=grads,
        trace=trace,
        loss=stats.loss,
        surrogate=stats.surrogate_term,
        kl=stats.kl_term,
        clip_fraction=stats.clip_fraction,
        mean_rewards=tuple(mean_rewards),
    )


def train(
    config: TrainConfig,
    policy: MicroPolicy,
    executor,
    *,
    instances: Sequence[ProblemInstance] | None = None,
    run_dir: str | Path | None = None,
    trace_store: TraceStore | None = None,
    on_step: Callable[[dict], None] | None = None,
) -> TrainSummary:
    """Run the full training loop and return a summary.

    ``instances`` bypasses dataset ingestion (library callers); otherwise
    ``config.dataset`` is read.  When ``run_dir`` is given, metrics stream to
    ``metrics.jsonl`` and group traces to ``traces.jsonl`` inside it.
    """
    problems = validate_train_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    if policy.role is not PolicyRole.TRAINABLE:
        raise RoleError(f"training requires a trainable policy, got {policy.role.value}")
    if policy.max_new_tokens > config.seam_max_response_tokens:
        raise ConfigError(
            "policy max_new_tokens exceeds seam_max_response_tokens "
            f"({policy.max_new_tokens} > {config.seam_max_response_tokens})"
        )
    if instances is None:
        instances = ingest_dataset(config.dataset)
    if not instances:
        raise IngestionError("training needs at least one instance")

    run_dir = Path(run_dir) if run_dir is not None else None
    metrics_path = None
    metrics_fh = None
    traces_path = None
    own_store = None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = run_dir / "metrics.jsonl"
        metrics_fh = open(metrics_path, "w", encoding="utf-8")
        if trace_store is None:
            traces_path = run_dir / "traces.jsonl"
            own_store = TraceStore(traces_path)
            trace_store = own_store
    if trace_store is not None and traces_path is None:
        traces_path = trace_store.path

    checkpoint_root = Path(config.checkpoint_dir) if config.checkpoint_dir else None
    reference = policy.snapshot(PolicyRole.REFERENCE)
    shuffle_rng = np.random.default_rng(config.seed)
    n = len(instances)
    per_epoch = math.ceil(n / config.batch_size)

    metrics: list[dict] = []
    step = 0
    updates = 0
    pending: dict[str, np.ndarray] | None = None
    pending_count = 0
    checkpoint_path: Path | None = None

    def _snapshot_config() -> dict:
        return asdict(config)

    def _flush_update(grads: dict[str, np.ndarray]) -> None:
        nonlocal updates
        policy.apply_update(grads, config.learning_rate)
        updates += 1

    try:
        for _epoch in range(config.epochs):
            order = shuffle_rng.permutation(n)
            for start in range(0, n, config.batch_size):
                step += 1
                batch = [instances[i] for i in order[start : start + config.batch_size]]
                old = policy.snapshot()
                batch_grads: dict[str, np.ndarray] = {}
                losses: list[float] = []
                surrogates: list[float] = []
                kls: list[float] = []
                clip_fractions: list[float] = []
                batch_mean_rewards: list[float] = []
                try:
                    for instance in batch:
                        result = _process_group(
                            config, policy, old, reference, executor, instance, step
                        )
                        for key, value in result.grads.items():
                            if key in batch_grads:
                                batch_grads[key] += value
                            else:
                                batch_grads[key] = value
                        losses.append(result.loss)
                        surrogates.append(result.surrogate)
                        kls.append(result.kl)
                        clip_fractions.append(result.clip_fraction)
                        batch_mean_rewards.extend(result.mean_rewards)
                        if trace_store is not None:
                            trace_store.append_trace(result.trace)
                    for key in batch_grads:
                        batch_grads[key] /= len(batch)
                    if config.accumulate_batches == 1:
                        _flush_update(batch_grads)
                    else:
                        if pending is None:
                            pending = {k: v.copy() for k, v in batch_grads.items()}
                        else:
                            for key, value in batch_grads.items():
                                pending[key] += value
                        pending_count += 1
                        if pending_count == config.accumulate_batches:
                            for key in pending:
                                pending[key] /= pending_count
                            _flush_update(pending)
                            pending = None
                            pending_count = 0
                except TrainingError as exc:
                    dump = _dump_diagnostics(
                        run_dir,
                        {
                            "step": step,
                            "instance_ids": [i.id for i in batch],
                            "losses": losses,
                            "error": str(exc),
                        },
                    )
                    suffix = f" (diagnostics: {dump})" if dump else ""
                    raise TrainingError(f"{exc}{suffix}") from exc

                line = {
                    "step": step,
                    "loss": float(np.mean(losses)),
                    "surrogate": float(np.mean(surrogates)),
                    "kl": float(np.mean(kls)),
                    "clip_fraction": float(np.mean(clip_fractions)),
                    "mean_reward": float(np.mean(batch_mean_rewards)),
                    "group_reward_histogram": _reward_histogram(batch_mean_rewards),
                }
                metrics.append(line)
                if metrics_fh is not None:
                    metrics_fh.write(json.dumps(line, sort_keys=True) + "\n")
                    metrics_fh.flush()
                if on_step is not None:
                    on_step(line)
                if (
                    checkpoint_root is not None
                    and config.checkpoint_interval > 0
                    and step % config.checkpoint_interval == 0
                ):
                    policy.save_checkpoint(
                        checkpoint_root / f"step-{step:06d}",
                        step=step,
                        config_snapshot=_snapshot_config(),
                        metric_tail=metrics[-5:],
                    )
        if pending is not None and pending_count:
            for key in pending:
                pending[key] /= pending_count
            _flush_update(pending)
        if checkpoint_root is not None:
            checkpoint_path = policy.save_checkpoint(
                checkpoint_root / "final",
                step=step,
                config_snapshot=_snapshot_config(),
                metric_tail=metrics[-5:],
            )
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
        if own_store is not None:
            own_store.close()

    assert step == per_epoch * config.epochs
    return TrainSummary(
        steps=step,
        updates=updates,
        epochs=config.epochs,
        final_loss=metrics[-1]["loss"] if metrics else float("nan"),
        final_mean_reward=metrics[-1]["mean_reward"] if metrics else float("nan"),
        metrics=tuple(metrics),
        metrics_path=metrics_path,
        traces_path=traces_path,
        checkpoint_path=checkpoint_path,
    )


def config_from_mapping(mapping: dict[str, str]) -> TrainConfig:
    """Build a TrainConfig from flat string key-value pairs.

    Dotted ``executor.*`` keys address the nested executor config.  Unknown
    keys and unparsable values are collected into one configuration error so
    a bad file reports every problem at once.
    """
    train_fields = {f.name: f.type for f in TrainConfig.__dataclass_fields__.values()}
    executor_fields = {f.name: f.type for f in ExecutorConfig.__dataclass_fields__.values()}
    base: dict = {}
    executor_overrides: dict = {}
    problems: list[str] = []
    for key, raw in mapping.items():
        if key.startswith("executor."):
            name = key[len("executor.") :]
            if name not in executor_fields:
                problems.append(f"unknown config key {key!r}")
                continue
            target, store = executor_fields[name], executor_overrides
        else:
            name = key
            if name not in train_fields or name == "executor":
                problems.append(f"unknown config key {key!r}")
                continue
            target, store = train_fields[name], base
        try:
            store[name] = _parse_value(raw, target)
        except ValueError as exc:
            problems.append(f"config key {key!r}: {exc}")
    if problems:
        raise ConfigError("; ".join(problems))
    executor = replace(ExecutorConfig(), **executor_overrides) if executor_overrides else ExecutorConfig()
    return replace(TrainConfig(executor=executor), **base)


def _parse_value(raw: str, annotation: str | type) -> object:
    text = str(annotation)
    raw = raw.strip()
    if "bool" in text:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if "int" in text and "| None" not in text:
        return int(raw)
    if "float" in text:
        return float(raw)
    if "| None" in text:
        if raw.lower() in ("", "none", "null"):
            return None
        return int(raw) if "int" in text else raw
    return raw
