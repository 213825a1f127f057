"""Evaluation reports, condition comparisons, scaling sweeps, and emission."""

from __future__ import annotations

import csv
import json

import pytest

from seamforge import (
    ComparisonReport,
    ConfigError,
    EvalReport,
    ScriptedExecutor,
    StorageError,
    SweepReport,
    TrainConfig,
    compare_conditions,
    compute_ttc,
    emit_report,
    evaluate,
    scaling_sweep,
)
from seamforge import toybench


def _sweep_config(**overrides) -> TrainConfig:
    base = dict(
        epochs=1,
        batch_size=4,
        k_candidates=2,
        m_rollouts=1,
        learning_rate=0.01,
    )
    base.update(overrides)
    return TrainConfig(**base)


# -- time-to-correct ----------------------------------------------------------


def test_ttc_is_latency_per_expected_correct_answer():
    assert compute_ttc(0.95, 0.352) == pytest.approx(2.6988, abs=1e-3)
    assert compute_ttc(1.0, 1.0) == 1.0
    assert compute_ttc(2.0, 0.5) == 4.0


def test_ttc_is_undefined_at_zero_accuracy():
    with pytest.warns(UserWarning, match="undefined"):
        assert compute_ttc(0.95, 0.0) is None


# -- evaluate -----------------------------------------------------------------


def test_no_guidance_baseline_misses_on_the_steering_bench():
    report = evaluate(None, toybench.toy_dataset(5), toybench.toy_executor(), n_runs=1)
    assert report.accuracy == 0.0
    assert report.ttc_seconds is None
    assert len(report.per_instance) == 5
    assert all(r.correct == 0 for r in report.per_instance)
    assert all(r.latency_seconds > 0 for r in report.per_instance)


def test_scripted_executor_collapses_repeat_runs():
    with pytest.warns(UserWarning, match="collapsing 10 runs to 1"):
        report = evaluate(
            None, toybench.toy_dataset(3), toybench.toy_executor(), n_runs=10
        )
    assert report.runs == 1
    assert report.run_seeds == (0,)
    assert len(report.run_accuracies) == 1


def test_correctness_only_scoring_ignores_entry_completeness():
    """evaluate counts right answers; entry structure is the trainer's concern."""
    from seamforge import ScriptedRule

    always = ScriptedExecutor(
        (ScriptedRule(lambda i, e: True, lambda i, e: i.target),)
    )
    report = evaluate(None, toybench.toy_dataset(4), always, n_runs=1)
    assert report.accuracy == 1.0  # empty advisory, but the answer is right


def test_subsample_fraction_reduces_the_instance_set():
    report = evaluate(
        None,
        toybench.toy_dataset(10),
        toybench.toy_executor(),
        n_runs=1,
        subsample_fraction=0.5,
    )
    assert len(report.per_instance) == 5
    ids = {r.instance_id for r in report.per_instance}
    assert ids <= {i.id for i in toybench.toy_dataset(10)}


def test_evaluate_validation():
    executor = toybench.toy_executor()
    with pytest.raises(ValueError, match="at least one instance"):
        evaluate(None, [], executor)
    with pytest.raises(ValueError, match="n_runs"):
        evaluate(None, toybench.toy_dataset(2), executor, n_runs=0)
    with pytest.raises(ValueError, match="subsample_fraction"):
        evaluate(None, toybench.toy_dataset(2), executor, subsample_fraction=0.0)


# -- comparisons --------------------------------------------------------------


def test_comparison_reports_absolute_and_relative_gains():
    from seamforge import ScriptedRule

    # Baseline answers correctly on ids ending in an even digit; the
    # "guided" condition always answers correctly.  Both ignore the policy.
    half = ScriptedExecutor(
        (
            ScriptedRule(
                lambda i, e: int(i.id.rsplit("-", 1)[-1]) % 2 == 0,
                lambda i, e: i.target,
            ),
        ),
        miss_answer="wrong",
    )
    report_half = evaluate(None, toybench.toy_dataset(4), half, n_runs=1)
    assert report_half.accuracy == 0.5

    comparison = compare_conditions(
        [("baseline", None), ("same", None)],
        toybench.toy_dataset(4),
        half,
        n_runs=1,
    )
    assert comparison.baseline == "baseline"
    assert not comparison.baseline_zero
    same = comparison.conditions[1]
    assert same.accuracy == 0.5
    assert same.absolute_delta == 0.0
    assert same.relative_gain_pct == 0.0


def test_zero_baseline_flags_and_omits_relative_gain():
    with pytest.warns(UserWarning, match="baseline accuracy is zero"):
        comparison = compare_conditions(
            [("baseline", None), ("also-zero", None)],
            toybench.toy_dataset(3),
            toybench.toy_executor(),
            n_runs=1,
        )
    assert comparison.baseline_zero
    assert all(c.relative_gain_pct is None for c in comparison.conditions)
    assert comparison.conditions[0].absolute_delta == 0.0


def test_comparison_validation():
    executor = toybench.toy_executor()
    with pytest.raises(ValueError, match="at least 2"):
        compare_conditions([("only", None)], toybench.toy_dataset(2), executor)
    with pytest.raises(ValueError, match="unique"):
        compare_conditions(
            [("dup", None), ("dup", None)], toybench.toy_dataset(2), executor
        )


# -- scaling sweep ------------------------------------------------------------


def test_sweep_covers_the_size_by_seed_grid():
    pool = toybench.varied_toy_dataset(8)
    holdout = toybench.varied_toy_dataset(4, prefix="ho")
    report = scaling_sweep(
        pool,
        [0, 4],
        _sweep_config(),
        holdout,
        toybench.toy_executor(),
        seeds=(0, 1),
        policy_factory=lambda seed: toybench.toy_policy(seed=seed),
    )
    assert report.sizes == (0, 4)
    assert report.seeds == (0, 1)
    assert len(report.points) == 4
    grid = {(p.experience_size, p.seed) for p in report.points}
    assert grid == {(0, 0), (0, 1), (4, 0), (4, 1)}
    for point in report.points:
        assert 0.0 <= point.accuracy <= 1.0


def test_sweep_size_zero_is_the_untrained_anchor():
    pool = toybench.varied_toy_dataset(4)
    holdout = toybench.varied_toy_dataset(3, prefix="ho")
    report = scaling_sweep(
        pool,
        [0],
        _sweep_config(),
        holdout,
        toybench.toy_executor(),
        seeds=(5,),
        policy_factory=lambda seed: toybench.toy_policy(seed=seed),
    )
    fresh = evaluate(
        toybench.toy_policy(seed=5), holdout, toybench.toy_executor(), n_runs=1, seed=5
    )
    assert report.points[0].accuracy == fresh.accuracy


def test_sweep_deduplicates_sizes_with_warning():
    pool = toybench.varied_toy_dataset(4)
    with pytest.warns(UserWarning, match="duplicate sweep sizes"):
        report = scaling_sweep(
            pool,
            [0, 2, 2],
            _sweep_config(),
            toybench.varied_toy_dataset(2, prefix="ho"),
            toybench.toy_executor(),
            seeds=(0,),
            policy_factory=lambda seed: toybench.toy_policy(seed=seed),
        )
    assert report.sizes == (0, 2)


def test_sweep_validation():
    pool = toybench.varied_toy_dataset(4)
    holdout = toybench.varied_toy_dataset(2, prefix="ho")
    executor = toybench.toy_executor()
    factory = lambda seed: toybench.toy_policy(seed=seed)  # noqa: E731
    with pytest.raises(ValueError, match="training pool"):
        scaling_sweep([], [1], _sweep_config(), holdout, executor, policy_factory=factory)
    with pytest.raises(ValueError, match="nonnegative"):
        scaling_sweep(pool, [-1], _sweep_config(), holdout, executor, policy_factory=factory)
    with pytest.raises(ValueError, match="exceeds"):
        scaling_sweep(pool, [9], _sweep_config(), holdout, executor, policy_factory=factory)
    with pytest.raises(ValueError, match="at least one seed"):
        scaling_sweep(
            pool, [1], _sweep_config(), holdout, executor, seeds=(), policy_factory=factory
        )


# -- emission -----------------------------------------------------------------


def _small_eval_report() -> EvalReport:
    return evaluate(None, toybench.toy_dataset(3), toybench.toy_executor(), n_runs=1)


def _small_sweep_report() -> SweepReport:
    return scaling_sweep(
        toybench.varied_toy_dataset(4),
        [0, 2],
        _sweep_config(),
        toybench.varied_toy_dataset(2, prefix="ho"),
        toybench.toy_executor(),
        seeds=(0,),
        policy_factory=lambda seed: toybench.toy_policy(seed=seed),
    )


def test_emitted_json_is_deterministic(tmp_path):
    report = _small_sweep_report()
    first = emit_report(report, tmp_path / "a", formats=("json",))[0].read_bytes()
    second = emit_report(report, tmp_path / "b", formats=("json",))[0].read_bytes()
    assert first == second
    payload = json.loads(first)
    assert payload["sizes"] == [0, 2]
    assert {p["experience_size"] for p in payload["points"]} == {0, 2}


def test_sweep_csv_layout(tmp_path):
    report = _small_sweep_report()
    paths = emit_report(report, tmp_path, formats=("csv",))
    rows = list(csv.reader(paths[0].open()))
    assert rows[0] == ["experience_size", "accuracy", "seed"]
    assert len(rows) == 1 + len(report.points)
    sizes = [int(r[0]) for r in rows[1:]]
    assert sizes == sorted(sizes)


def test_eval_csv_layout(tmp_path):
    report = _small_eval_report()
    paths = emit_report(report, tmp_path, formats=("csv",))
    rows = list(csv.reader(paths[0].open()))
    assert rows[0] == ["instance_id", "run_index", "correct", "latency_seconds"]
    assert len(rows) == 1 + len(report.per_instance)


def test_comparison_csv_blanks_undefined_relative_gain(tmp_path):
    with pytest.warns(UserWarning, match="baseline accuracy is zero"):
        comparison = compare_conditions(
            [("baseline", None), ("other", None)],
            toybench.toy_dataset(2),
            toybench.toy_executor(),
            n_runs=1,
        )
    paths = emit_report(comparison, tmp_path, formats=("csv",))
    rows = list(csv.reader(paths[0].open()))
    assert rows[0] == ["condition", "accuracy", "absolute_delta", "relative_gain_pct"]
    assert rows[1][3] == ""  # undefined ratio stays blank, not 0


def test_plot_format_writes_png(tmp_path):
    report = _small_sweep_report()
    paths = emit_report(report, tmp_path, formats=("json", "csv", "plot"))
    assert [p.name for p in paths] == ["report.json", "report.csv", "report.png"]
    png = paths[2]
    assert png.parent.name == "plots"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_unknown_format_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="unknown report format"):
        emit_report(_small_eval_report(), tmp_path, formats=("yaml",))


def test_unwritable_target_is_a_storage_error(tmp_path):
    target = tmp_path / "occupied"
    target.write_text("a regular file is squatting on the report directory")
    with pytest.raises(StorageError, match="cannot write report"):
        emit_report(_small_eval_report(), target, formats=("json",))


def test_emit_returns_comparison_report_roundtrip(tmp_path):
    comparison = ComparisonReport(baseline="a", baseline_zero=False, conditions=())
    paths = emit_report(comparison, tmp_path, formats=("json",))
    payload = json.loads(paths[0].read_text())
    assert payload == {"baseline": "a", "baseline_zero": False, "conditions": []}
