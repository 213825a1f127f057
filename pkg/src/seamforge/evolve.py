"""Deployment-time evolution: log entries that actually solved an instance,
then teacher-force the policy on its own successes.

The guidance policy keeps improving after training without any gradient
signal from the executor: a fraction of incoming traffic is streamed, every
(instance, entry) pair that earns full reward is appended to a success
buffer, and once streaming halts the policy is fine-tuned on the buffer with
plain negative log-likelihood.  The executor is never touched.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, StorageError
from .evalkit import evaluate
from .policy import EOS_ID, MicroPolicy, PolicyRole
from .reward import aggregate_rewards, compute_reward
from .schema import ExperienceEntry, ProblemInstance, parse_experience, render_seam_prompt

logger = logging.getLogger(__name__)

LOSS_REDUCTIONS = ("mean", "sum")
_SFT_SEED_TAG = 982451653  # distinguishes the SFT sampler from the split rng


@dataclass(frozen=True)
class SuccessRecord:
    """One logged success: the instance as seen, and the entry that solved it."""

    instance_id: str
    statement: str
    entry_raw_text: str
    reward_value: float
    logged_at: int

    def __post_init__(self) -> None:
        if self.reward_value != 1.0:
            raise ValueError("only full-reward successes may be recorded")
        if self.logged_at < 0:
            raise ValueError("logged_at must be a nonnegative counter")


@dataclass(frozen=True)
class EvolutionProtocol:
    """Streaming-and-refit schedule."""

    stream_fraction: float = 0.30
    max_rounds: int = 10
    buffer_cap: int = 1000
    sft_steps: int = 500
    micro_batch: int = 8
    sft_learning_rate: float = 1e-5
    stream_temperature: float = 1.0
    interleaved_sft: bool = False
    loss_reduction: str = "mean"

    def __post_init__(self) -> None:
        problems = []
        if not 0 < self.stream_fraction < 1:
            problems.append("stream_fraction must be in (0, 1)")
        if self.max_rounds < 1:
            problems.append("max_rounds must be >= 1")
        if self.buffer_cap < 1:
            problems.append("buffer_cap must be >= 1")
        if self.sft_steps < 0:
            problems.append("sft_steps must be >= 0")
        if self.micro_batch < 1:
            problems.append("micro_batch must be >= 1")
        if self.sft_learning_rate <= 0:
            problems.append("sft_learning_rate must be positive")
        if self.stream_temperature <= 0:
            problems.append("stream_temperature must be positive")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            problems.append(f"loss_reduction must be one of {LOSS_REDUCTIONS}")
        if problems:
            raise ConfigError("; ".join(problems))


class SuccessBuffer:
    """Capped, deduplicated success store with optional JSONL persistence.

    The on-disk layout is one JSON record per line plus a sidecar holding the
    record count and a checksum of the log bytes; a sidecar mismatch on load
    is repaired with a warning rather than treated as fatal.
    """

    def __init__(self, cap: int, path: str | Path | None = None):
        if cap < 1:
            raise ValueError("buffer cap must be >= 1")
        self.cap = cap
        self.path = Path(path) if path is not None else None
        self.records: list[SuccessRecord] = []
        self._keys: set[tuple[str, str]] = set()
        if self.path is not None and self.path.exists():
            self._load()

    def _sidecar(self) -> Path:
        assert self.path is not None
        return self.path.with_name(self.path.name + ".index")

    def _load(self) -> None:
        assert self.path is not None
        try:
            raw = self.path.read_bytes()
            for line in raw.decode("utf-8").splitlines():
                if not line.strip():
                    continue
                payload = json.loads(line)
                record = SuccessRecord(**payload)
                self.records.append(record)
                self._keys.add((record.instance_id, record.entry_raw_text))
        except (OSError, ValueError, TypeError) as exc:
            raise StorageError(f"cannot load success buffer {self.path}: {exc}") from exc
        sidecar = self._sidecar()
        expected = {"count": len(self.records), "crc32": format(zlib.crc32(raw), "08x")}
        if sidecar.exists():
            try:
                stored = json.loads(sidecar.read_text(encoding="utf-8"))
            except (OSError, ValueError):
                stored = None
            if stored != expected:
                warnings.warn(f"rebuilding stale buffer index {sidecar}", stacklevel=2)
        self._write_sidecar()

    def _write_sidecar(self) -> None:
        assert self.path is not None
        raw = self.path.read_bytes() if self.path.exists() else b""
        payload = {"count": len(self.records), "crc32": format(zlib.crc32(raw), "08x")}
        try:
            self._sidecar().write_text(json.dumps(payload) + "\n", encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot write buffer index {self._sidecar()}: {exc}") from exc

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> SuccessRecord:
        return self.records[index]

    @property
    def full(self) -> bool:
        return len(self.records) >= self.cap

    def append(self, record: SuccessRecord) -> bool:
        key = (record.instance_id, record.entry_raw_text)
        if key in self._keys:
            return False
        if self.full:
            warnings.warn("success buffer is at capacity; dropping record", stacklevel=2)
            return False
        self.records.append(record)
        self._keys.add(key)
        if self.path is not None:
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")
            except OSError as exc:
                raise StorageError(f"cannot append to success buffer {self.path}: {exc}") from exc
            self._write_sidecar()
        return True


def log_success(
    buffer: SuccessBuffer,
    instance: ProblemInstance,
    entry: ExperienceEntry,
    reward_value: float,
) -> bool:
    """Record (instance, entry) iff the reward is full; returns whether stored."""
    if reward_value != 1.0:
        return False
    record = SuccessRecord(
        instance_id=instance.id,
        statement=instance.statement,
        entry_raw_text=entry.raw_text,
        reward_value=1.0,
        logged_at=len(buffer),
    )
    return buffer.append(record)


def _record_instance(record: SuccessRecord) -> ProblemInstance:
    # Target is irrelevant for teacher forcing; only the statement feeds the prompt.
    return ProblemInstance(id=record.instance_id, statement=record.statement, target="")


def _forced_tokens(policy: MicroPolicy, record: SuccessRecord) -> tuple[str, tuple[int, ...]]:
    prompt = render_seam_prompt(_record_instance(record))
    tokens = tuple(policy.tokenizer.encode(record.entry_raw_text)) + (EOS_ID,)
    return prompt, tokens


def sft_loss(
    policy: MicroPolicy,
    records: Sequence[SuccessRecord],
    reduction: str = "mean",
) -> float:
    """Teacher-forced negative log-likelihood of the recorded entries.

    ``mean`` divides each record's NLL by its token count (length-invariant);
    ``sum`` keeps the raw sequence NLL.  Both average over the batch.
    """
    loss, _ = _sft_terms(policy, records, reduction, want_grads=False)
    return loss


def sft_loss_grads(
    policy: MicroPolicy,
    records: Sequence[SuccessRecord],
    reduction: str = "mean",
) -> tuple[float, dict[str, np.ndarray]]:
    loss, grads = _sft_terms(policy, records, reduction, want_grads=True)
    assert grads is not None
    return loss, grads


def _sft_terms(
    policy: MicroPolicy,
    records: Sequence[SuccessRecord],
    reduction: str,
    want_grads: bool,
) -> tuple[float, dict[str, np.ndarray] | None]:
    if not records:
        raise ValueError("sft batch must be non-empty")
    if reduction not in LOSS_REDUCTIONS:
        raise ValueError(f"reduction must be one of {LOSS_REDUCTIONS}")
    batch = len(records)
    total = 0.0
    grads: dict[str, np.ndarray] | None = None
    for record in records:
        prompt, tokens = _forced_tokens(policy, record)
        if want_grads:
            logps, vjp = policy.score_with_vjp(prompt, tokens)
        else:
            logps = policy.score_sequence(prompt, tokens)
        scale = 1.0 / len(tokens) if reduction == "mean" else 1.0
        total += -scale * float(logps.sum())
        if want_grads:
            dlogp = np.full(len(tokens), -scale / batch)
            for key, value in vjp(dlogp).items():
                if grads is None:
                    grads = {}
                if key in grads:
                    grads[key] += value
                else:
                    grads[key] = value
    return total / batch, grads


@dataclass(frozen=True)
class EvolutionSummary:
    rounds_run: int
    buffer_size: int
    stream_size: int
    eval_size: int
    pre_accuracy: float
    post_accuracy: float
    sft_steps_run: int
    final_sft_loss: float | None


def split_dataset(
    dataset: Sequence[ProblemInstance], stream_fraction: float, seed: int
) -> tuple[list[ProblemInstance], list[ProblemInstance]]:
    """Seeded disjoint (stream, heldout) split; errors if either side is empty."""
    n = len(dataset)
    stream_n = round(stream_fraction * n)
    if stream_n < 1:
        raise ConfigError(
            f"stream split is empty ({stream_fraction} of {n} instances)"
        )
    if stream_n >= n:
        raise ConfigError(
            f"held-out split is empty ({stream_fraction} of {n} instances)"
        )
    order = np.random.default_rng(seed).permutation(n)
    stream = [dataset[i] for i in order[:stream_n]]
    heldout = [dataset[i] for i in order[stream_n:]]
    return stream, heldout


def run_evolution(
    protocol: EvolutionProtocol,
    dataset: Sequence[ProblemInstance],
    policy: MicroPolicy,
    executor,
    *,
    seed: int = 0,
    buffer_path: str | Path | None = None,
    eval_runs: int = 1,
) -> EvolutionSummary:
    """Stream, log successes, refit; returns before/after held-out accuracy.

    Streaming samples one entry per instance per round at the protocol's
    temperature (a greedy pass would explore nothing), solves it with the
    frozen executor, and logs full-reward pairs.  Streaming halts early when
    the buffer hits its cap.  The refit phase then runs ``sft_steps``
    micro-batch gradient steps on the buffer — or, in interleaved mode, the
    step budget is spread across rounds as the buffer grows.
    """
    if policy.role is not PolicyRole.TRAINABLE:
        raise ConfigError(f"evolution requires a trainable policy, got {policy.role.value}")
    if not dataset:
        raise ConfigError("evolution needs a dataset")
    stream, heldout = split_dataset(dataset, protocol.stream_fraction, seed)

    pre = evaluate(policy, heldout, executor, n_runs=eval_runs, seed=seed)
    buffer = SuccessBuffer(protocol.buffer_cap, buffer_path)
    sft_rng = np.random.default_rng((seed, _SFT_SEED_TAG))
    steps_run = 0
    last_loss: float | None = None

    def _refit(step_budget: int) -> None:
        nonlocal steps_run, last_loss
        if not len(buffer):
            return
        for _ in range(step_budget):
            picks = sft_rng.integers(0, len(buffer), size=protocol.micro_batch)
            records = [buffer[int(i)] for i in picks]
            loss, grads = sft_loss_grads(policy, records, protocol.loss_reduction)
            policy.apply_update(grads, protocol.sft_learning_rate)
            steps_run += 1
            last_loss = loss

    per_round_budget = math.ceil(protocol.sft_steps / protocol.max_rounds)
    rounds_run = 0
    for round_index in range(protocol.max_rounds):
        if buffer.full:
            break
        rounds_run += 1
        for instance in stream:
            if buffer.full:
                break
            draw_seed = int(
                np.random.SeedSequence(
                    (seed, round_index, zlib.crc32(instance.id.encode("utf-8")))
                ).generate_state(1, dtype=np.uint64)[0]
            )
            prompt = render_seam_prompt(instance)
            [sequence] = policy.sample_candidates(
                prompt, 1, temperature=protocol.stream_temperature, seed=draw_seed
            )
            entry = parse_experience(sequence.text, token_count=len(sequence.tokens))
            rollouts = executor.solve(instance, entry)
            rewards = [compute_reward(r, entry, instance) for r in rollouts]
            log_success(buffer, instance, entry, aggregate_rewards(rewards))
        if protocol.interleaved_sft:
            _refit(min(per_round_budget, protocol.sft_steps - steps_run))

    if not protocol.interleaved_sft:
        _refit(protocol.sft_steps)
    if not len(buffer):
        logger.warning("no successes were logged; the policy is unchanged")

    post = evaluate(policy, heldout, executor, n_runs=eval_runs, seed=seed)
    return EvolutionSummary(
        rounds_run=rounds_run,
        buffer_size=len(buffer),
        stream_size=len(stream),
        eval_size=len(heldout),
        pre_accuracy=pre.accuracy,
        post_accuracy=post.accuracy,
        sft_steps_run=steps_run,
        final_sft_loss=last_loss,
    )
