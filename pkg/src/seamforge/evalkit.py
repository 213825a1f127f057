"""Evaluation harness: repeated-run accuracy, latency, time-to-correct, and
the experience-size scaling sweep, with JSON/CSV/plot report emission.

Accuracy here is pass@1 under greedy guidance generation: one entry per
instance, one executor attempt, answer-correctness only (an incomplete entry
may still earn credit if the executor answers correctly — the training-time
completeness gate is deliberately not applied at evaluation time).
"""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, is_dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, StorageError
from .executor import ScriptedExecutor
from .policy import MicroPolicy
from .reward import answers_equal
from .schema import ExperienceEntry, ProblemInstance, parse_experience, render_seam_prompt
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)

REPORT_FORMATS = ("json", "csv", "plot")


@dataclass(frozen=True)
class InstanceResult:
    instance_id: str
    run_index: int
    correct: int
    latency_seconds: float


@dataclass(frozen=True)
class EvalReport:
    per_instance: tuple[InstanceResult, ...]
    run_accuracies: tuple[float, ...]
    accuracy: float
    mean_latency: float
    ttc_seconds: float | None
    runs: int
    run_seeds: tuple[int, ...]


@dataclass(frozen=True)
class ConditionResult:
    name: str
    accuracy: float
    absolute_delta: float
    relative_gain_pct: float | None
    report: EvalReport


@dataclass(frozen=True)
class ComparisonReport:
    baseline: str
    baseline_zero: bool
    conditions: tuple[ConditionResult, ...]


@dataclass(frozen=True)
class ScalingPoint:
    experience_size: int
    seed: int
    accuracy: float


@dataclass(frozen=True)
class SweepReport:
    sizes: tuple[int, ...]
    seeds: tuple[int, ...]
    points: tuple[ScalingPoint, ...]


def compute_ttc(mean_latency: float, accuracy: float) -> float | None:
    """Expected seconds per correct answer; undefined at zero accuracy."""
    if accuracy <= 0:
        warnings.warn("accuracy is zero; time-to-correct is undefined", stacklevel=2)
        return None
    return mean_latency / accuracy


def _greedy_entry(policy: MicroPolicy | None, instance: ProblemInstance) -> ExperienceEntry:
    if policy is None:
        return parse_experience("")
    prompt = render_seam_prompt(instance)
    [sequence] = policy.sample_candidates(prompt, 1, temperature=0.0, seed=0)
    return parse_experience(sequence.text, token_count=len(sequence.tokens))


def evaluate(
    policy: MicroPolicy | None,
    dataset: Sequence[ProblemInstance],
    executor,
    *,
    n_runs: int = 10,
    seed: int = 0,
    subsample_fraction: float = 1.0,
) -> EvalReport:
    """Greedy pass@1 accuracy averaged over repeated runs.

    ``policy=None`` evaluates the executor with an empty advisory (the
    no-guidance baseline).  Deterministic scripted executors collapse the
    repeat loop to a single run, since every run would be identical.
    """
    if not dataset:
        raise ValueError("evaluation needs at least one instance")
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if not 0 < subsample_fraction <= 1:
        raise ValueError("subsample_fraction must be in (0, 1]")

    instances = list(dataset)
    if subsample_fraction < 1:
        keep = max(1, round(subsample_fraction * len(instances)))
        picked = np.random.default_rng(seed).permutation(len(instances))[:keep]
        instances = [instances[i] for i in sorted(picked)]

    effective_runs = n_runs
    if n_runs > 1 and isinstance(executor, ScriptedExecutor):
        warnings.warn(
            "scripted executor under greedy generation is deterministic; "
            f"collapsing {n_runs} runs to 1",
            stacklevel=2,
        )
        effective_runs = 1

    per_instance: list[InstanceResult] = []
    run_accuracies: list[float] = []
    run_seeds = tuple(seed + r for r in range(effective_runs))
    for run_index, _run_seed in enumerate(run_seeds):
        correct_count = 0
        for instance in instances:
            started = time.perf_counter()
            entry = _greedy_entry(policy, instance)
            rollout = executor.solve(instance, entry)[0]
            latency = time.perf_counter() - started
            correct = int(answers_equal(rollout.extracted_answer, instance.target))
            correct_count += correct
            per_instance.append(
                InstanceResult(
                    instance_id=instance.id,
                    run_index=run_index,
                    correct=correct,
                    latency_seconds=latency,
                )
            )
        run_accuracies.append(correct_count / len(instances))

    accuracy = float(np.mean(run_accuracies))
    mean_latency = float(np.mean([r.latency_seconds for r in per_instance]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ttc = compute_ttc(mean_latency, accuracy)
    return EvalReport(
        per_instance=tuple(per_instance),
        run_accuracies=tuple(run_accuracies),
        accuracy=accuracy,
        mean_latency=mean_latency,
        ttc_seconds=ttc,
        runs=effective_runs,
        run_seeds=run_seeds,
    )


def compare_conditions(
    conditions: Sequence[tuple[str, MicroPolicy | None]],
    dataset: Sequence[ProblemInstance],
    executor,
    *,
    n_runs: int = 10,
    seed: int = 0,
) -> ComparisonReport:
    """Evaluate several guidance conditions under identical seeds.

    The first condition is the baseline; relative gains are
    ``(accuracy - baseline) / baseline * 100``.  A zero-accuracy baseline
    makes the ratio undefined, so the report flags it and falls back to
    absolute deltas.
    """
    if len(conditions) < 2:
        raise ValueError("need at least 2 conditions to compare")
    names = [name for name, _ in conditions]
    if len(set(names)) != len(names):
        raise ValueError("condition names must be unique")
    reports = [
        evaluate(policy, dataset, executor, n_runs=n_runs, seed=seed)
        for _, policy in conditions
    ]
    base = reports[0].accuracy
    baseline_zero = base == 0
    if baseline_zero:
        warnings.warn(
            "baseline accuracy is zero; reporting absolute deltas only", stacklevel=2
        )
    rows = []
    for (name, _), report in zip(conditions, reports):
        delta = report.accuracy - base
        rows.append(
            ConditionResult(
                name=name,
                accuracy=report.accuracy,
                absolute_delta=delta,
                relative_gain_pct=None if baseline_zero else delta / base * 100.0,
                report=report,
            )
        )
    return ComparisonReport(
        baseline=names[0], baseline_zero=baseline_zero, conditions=tuple(rows)
    )


def scaling_sweep(
    train_dataset: Sequence[ProblemInstance],
    sizes: Sequence[int],
    config: TrainConfig,
    eval_dataset: Sequence[ProblemInstance],
    executor,
    *,
    seeds: Sequence[int] = (0,),
    policy_factory: Callable[[int], MicroPolicy],
) -> SweepReport:
    """Accuracy as a function of training-set size.

    For each seed, one permutation of the training pool yields nested subsets
    (every smaller size is a prefix of every larger one), so curve points
    differ only by how much experience was available.  Size 0 is the
    untrained-policy anchor.
    """
    if not train_dataset:
        raise ValueError("scaling sweep needs a training pool")
    if not seeds:
        raise ValueError("scaling sweep needs at least one seed")
    cleaned = sorted(set(int(s) for s in sizes))
    if len(cleaned) != len(sizes):
        warnings.warn("duplicate sweep sizes removed", stacklevel=2)
    if not cleaned:
        raise ValueError("scaling sweep needs at least one size")
    if cleaned[0] < 0:
        raise ValueError("sweep sizes must be nonnegative")
    if cleaned[-1] > len(train_dataset):
        raise ValueError(
            f"sweep size {cleaned[-1]} exceeds the {len(train_dataset)}-instance pool"
        )

    points: list[ScalingPoint] = []
    for seed in seeds:
        order = np.random.default_rng(seed).permutation(len(train_dataset))
        for size in cleaned:
            policy = policy_factory(seed)
            if size > 0:
                subset = [train_dataset[i] for i in order[:size]]
                train(replace(config, seed=seed), policy, executor, instances=subset)
            report = evaluate(policy, eval_dataset, executor, n_runs=1, seed=seed)
            points.append(
                ScalingPoint(experience_size=size, seed=seed, accuracy=report.accuracy)
            )
    return SweepReport(
        sizes=tuple(cleaned), seeds=tuple(int(s) for s in seeds), points=tuple(points)
    )


def _jsonable(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {k: _jsonable(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def _write_csv(report, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(report, SweepReport):
            writer.writerow(["experience_size", "accuracy", "seed"])
            for point in sorted(report.points, key=lambda p: (p.experience_size, p.seed)):
                writer.writerow([point.experience_size, point.accuracy, point.seed])
        elif isinstance(report, ComparisonReport):
            writer.writerow(["condition", "accuracy", "absolute_delta", "relative_gain_pct"])
            for row in report.conditions:
                writer.writerow(
                    [
                        row.name,
                        row.accuracy,
                        row.absolute_delta,
                        "" if row.relative_gain_pct is None else row.relative_gain_pct,
                    ]
                )
        elif isinstance(report, EvalReport):
            writer.writerow(["instance_id", "run_index", "correct", "latency_seconds"])
            for row in report.per_instance:
                writer.writerow(
                    [row.instance_id, row.run_index, row.correct, row.latency_seconds]
                )
        else:
            raise ConfigError(f"no CSV layout for {type(report).__name__}")


def _write_plot(report, path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        if isinstance(report, SweepReport):
            by_size: dict[int, list[float]] = {}
            for point in report.points:
                by_size.setdefault(point.experience_size, []).append(point.accuracy)
            xs = sorted(by_size)
            means = [float(np.mean(by_size[x])) for x in xs]
            for point in report.points:
                ax.scatter(point.experience_size, point.accuracy, color="tab:gray", s=12)
            ax.plot(xs, means, marker="o", color="tab:blue")
            ax.set_xlabel("training instances")
            ax.set_ylabel("accuracy")
            ax.set_title("accuracy vs experience size")
        elif isinstance(report, ComparisonReport):
            names = [row.name for row in report.conditions]
            accs = [row.accuracy for row in report.conditions]
            ax.bar(names, accs, color="tab:blue")
            ax.set_ylabel("accuracy")
            ax.set_title("condition comparison")
        elif isinstance(report, EvalReport):
            ax.bar(range(len(report.run_accuracies)), report.run_accuracies, color="tab:blue")
            ax.set_xlabel("run")
            ax.set_ylabel("accuracy")
            ax.set_title("per-run accuracy")
        else:
            raise ConfigError(f"no plot layout for {type(report).__name__}")
        ax.set_ylim(0, 1.05)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": "seamforge"})
    finally:
        plt.close(fig)


def emit_report(
    report,
    out_dir: str | Path,
    formats: Sequence[str] = ("json", "csv"),
) -> list[Path]:
    """Write a report in the requested formats; returns the paths written.

    JSON output uses sorted keys and CSV rows use a fixed ordering, so two
    emissions of the same report are byte-identical.
    """
    for fmt in formats:
        if fmt not in REPORT_FORMATS:
            raise ConfigError(f"unknown report format {fmt!r}; choose from {REPORT_FORMATS}")
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out_dir / "report.json"
            path.write_text(
                json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            written.append(path)
        if "csv" in formats:
            path = out_dir / "report.csv"
            _write_csv(report, path)
            written.append(path)
        if "plot" in formats:
            plots = out_dir / "plots"
            plots.mkdir(exist_ok=True)
            path = plots / "report.png"
            _write_plot(report, path)
            written.append(path)
    except OSError as exc:
        raise StorageError(f"cannot write report under {out_dir}: {exc}") from exc
    return written
