"""Training loop: validation, ingestion, determinism, accounting, and aborts."""

from __future__ import annotations

import json

import numpy as np
import pytest

from seamforge import (
    ConfigError,
    IngestionError,
    MicroPolicy,
    PolicyRole,
    RoleError,
    TrainConfig,
    TrainingError,
    generate,
    ingest_dataset,
    replay_check,
    train,
    validate_train_config,
)
from seamforge.trainer import METRIC_KEYS, config_from_mapping
from seamforge import toybench


def _config(**overrides) -> TrainConfig:
    base = dict(
        epochs=1,
        batch_size=4,
        k_candidates=4,
        m_rollouts=1,
        learning_rate=0.05,
        clip_eps=0.2,
        beta=0.001,
        delta=1e-4,
    )
    base.update(overrides)
    return TrainConfig(**base)


# -- config validation --------------------------------------------------------


def test_validator_names_every_violated_key():
    config = TrainConfig(
        epochs=0,
        batch_size=0,
        k_candidates=1,
        m_rollouts=0,
        learning_rate=0.0,
        optimizer="sideways",
        clip_eps=1.5,
        beta=-1.0,
        delta=0.0,
        ratio_level="stanza",
        kl_mode="vibes",
        accumulate_batches=0,
        seam_temperature=0.0,
        seam_max_prompt_tokens=0,
        seam_max_response_tokens=0,
        executor_max_prompt_tokens=0,
        executor_max_response_tokens=0,
        checkpoint_interval=-1,
    )
    problems = validate_train_config(config)
    for key in (
        "epochs",
        "batch_size",
        "k_candidates",
        "m_rollouts",
        "learning_rate",
        "optimizer",
        "clip_eps",
        "beta",
        "delta",
        "ratio_level",
        "kl_mode",
        "accumulate_batches",
        "seam_temperature",
        "seam_max_prompt_tokens",
        "seam_max_response_tokens",
        "executor_max_prompt_tokens",
        "executor_max_response_tokens",
        "checkpoint_interval",
    ):
        assert any(key in p for p in problems), f"no violation names {key}"
    assert len(problems) == 18


def test_default_config_is_valid():
    assert validate_train_config(TrainConfig()) == []


def test_train_rejects_invalid_config_before_touching_the_policy():
    policy = toybench.toy_policy()
    with pytest.raises(ConfigError, match="k_candidates"):
        train(_config(k_candidates=1), policy, toybench.toy_executor(), instances=toybench.toy_dataset(2))


# -- ingestion ----------------------------------------------------------------


def test_ingest_accepts_mixed_id_and_answer_types(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text(
        "\n".join(
            [
                json.dumps({"id": "a1", "problem": "What is 2+2?", "answer": "4"}),
                "",  # blank lines are skipped
                json.dumps({"id": 7, "problem": "What is 3+3?", "answer": 6}),
                json.dumps(
                    {"id": "c", "problem": "Half of one?", "answer": 0.5, "domain": "math"}
                ),
            ]
        )
        + "\n"
    )
    instances = ingest_dataset(path)
    assert [i.id for i in instances] == ["a1", "7", "c"]
    assert instances[1].target == "6"
    assert instances[2].target == "0.5"
    assert instances[2].domain_tag == "math"
    assert instances[0].domain_tag is None


@pytest.mark.parametrize(
    "line,fragment",
    [
        ("{not json", "not valid JSON"),
        ('["a", "list"]', "must be a JSON object"),
        ('{"problem": "p", "answer": "a"}', "missing field 'id'"),
        ('{"id": "x", "answer": "a"}', "missing field 'problem'"),
        ('{"id": "x", "problem": "p"}', "missing field 'answer'"),
        ('{"id": [1], "problem": "p", "answer": "a"}', "'id' must be"),
        ('{"id": "x", "problem": "  ", "answer": "a"}', "'problem' must be"),
        ('{"id": "x", "problem": "p", "answer": null}', "'answer' must be"),
        ('{"id": "x", "problem": "p", "answer": "a", "domain": 3}', "'domain' must be"),
    ],
)
def test_ingest_errors_cite_path_and_line(tmp_path, line, fragment):
    path = tmp_path / "data.jsonl"
    good = json.dumps({"id": "ok", "problem": "p", "answer": "a"})
    path.write_text(good + "\n" + line + "\n")
    with pytest.raises(IngestionError, match="data.jsonl:2"):
        try:
            ingest_dataset(path)
        except IngestionError as exc:
            assert fragment in str(exc)
            raise


def test_duplicate_id_cites_both_lines(tmp_path):
    path = tmp_path / "data.jsonl"
    record = {"id": "dup", "problem": "p", "answer": "a"}
    path.write_text(json.dumps(record) + "\n\n" + json.dumps(record) + "\n")
    with pytest.raises(IngestionError, match=r"data.jsonl:3.*'dup'.*first seen at line 1"):
        ingest_dataset(path)


def test_empty_dataset_and_missing_file_are_ingestion_errors(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("\n\n")
    with pytest.raises(IngestionError, match="no instances"):
        ingest_dataset(empty)
    with pytest.raises(IngestionError, match="cannot read dataset"):
        ingest_dataset(tmp_path / "absent.jsonl")


# -- generation ---------------------------------------------------------------


def test_generate_is_deterministic():
    policy = toybench.toy_policy(seed=1)
    instance = toybench.toy_dataset(1)[0]
    first = generate(policy, instance)
    second = generate(policy, instance)
    assert first.raw_text == second.raw_text
    assert first.token_count == second.token_count


# -- the loop -----------------------------------------------------------------


def test_identical_runs_produce_identical_metric_streams():
    instances = toybench.toy_dataset(6)
    streams = []
    for _ in range(2):
        policy = toybench.toy_policy(seed=3)
        summary = train(
            _config(epochs=2, batch_size=3),
            policy,
            toybench.toy_executor(),
            instances=instances,
        )
        streams.append(summary.metrics)
    assert streams[0] == streams[1]


def test_step_accounting_with_ragged_final_batch():
    instances = toybench.toy_dataset(5)
    policy = toybench.toy_policy(seed=0)
    summary = train(
        _config(epochs=3, batch_size=2),
        policy,
        toybench.toy_executor(),
        instances=instances,
    )
    # ceil(5 / 2) = 3 steps per epoch, 3 epochs.
    assert summary.steps == 9
    assert summary.updates == 9
    assert summary.epochs == 3
    assert [m["step"] for m in summary.metrics] == list(range(1, 10))


def test_gradient_accumulation_reduces_update_count():
    instances = toybench.toy_dataset(5)
    policy = toybench.toy_policy(seed=0)
    summary = train(
        _config(epochs=3, batch_size=2, accumulate_batches=2),
        policy,
        toybench.toy_executor(),
        instances=instances,
    )
    # 9 steps: four full 2-batch windows plus one trailing flush.
    assert summary.steps == 9
    assert summary.updates == 5


def test_metric_rows_have_exactly_the_published_keys():
    policy = toybench.toy_policy(seed=2)
    summary = train(
        _config(),
        policy,
        toybench.toy_executor(),
        instances=toybench.toy_dataset(4),
    )
    for row in summary.metrics:
        assert tuple(row) == METRIC_KEYS


def test_all_zero_rewards_leave_parameters_exactly_unchanged():
    """Degenerate groups give zero advantages, so nothing ever moves."""
    policy = toybench.toy_policy(seed=5)
    before = {k: v.copy() for k, v in policy.params.items()}
    hopeless = toybench.toy_executor(miss_answer="wrong")
    # Strip the steering rule so no candidate is ever rewarded.
    from seamforge import ScriptedExecutor

    hopeless = ScriptedExecutor((), hopeless.config, miss_answer="wrong")
    summary = train(
        _config(epochs=2),
        policy,
        hopeless,
        instances=toybench.toy_dataset(4),
    )
    for key in before:
        np.testing.assert_array_equal(policy.params[key], before[key])
    assert summary.final_mean_reward == 0.0
    assert all(m["kl"] == 0.0 for m in summary.metrics)


def test_first_step_loss_is_numerically_zero():
    policy = toybench.toy_policy(seed=7)
    summary = train(
        _config(),
        policy,
        toybench.toy_executor(),
        instances=toybench.toy_dataset(4),
    )
    assert abs(summary.metrics[0]["loss"]) <= 1e-9


def test_non_finite_loss_aborts_with_diagnostics(tmp_path, monkeypatch):
    from seamforge import trainer as trainer_module
    from seamforge.grpo import GrpoLossStats

    real = trainer_module.grpo_loss_grads

    def poisoned(group, **kwargs):
        stats, grads = real(group, **kwargs)
        bad = GrpoLossStats(
            loss=float("nan"),
            surrogate_term=stats.surrogate_term,
            kl_term=stats.kl_term,
            clip_fraction=stats.clip_fraction,
            mean_ratio=stats.mean_ratio,
        )
        return bad, grads

    monkeypatch.setattr(trainer_module, "grpo_loss_grads", poisoned)
    run_dir = tmp_path / "run"
    policy = toybench.toy_policy(seed=1)
    with pytest.raises(TrainingError, match="diagnostics"):
        train(
            _config(),
            policy,
            toybench.toy_executor(),
            instances=toybench.toy_dataset(4),
            run_dir=run_dir,
        )
    payload = json.loads((run_dir / "diagnostics.json").read_text())
    assert payload["step"] == 1
    assert payload["instance_ids"]


def test_checkpoint_interval_writes_numbered_snapshots(tmp_path):
    policy = toybench.toy_policy(seed=4)
    config = _config(
        epochs=2,
        batch_size=2,
        checkpoint_dir=str(tmp_path / "ckpts"),
        checkpoint_interval=2,
    )
    summary = train(
        config, policy, toybench.toy_executor(), instances=toybench.toy_dataset(4)
    )
    assert summary.steps == 4
    names = sorted(p.name for p in (tmp_path / "ckpts").iterdir())
    assert names == ["final", "step-000002", "step-000004"]
    loaded = MicroPolicy.load_checkpoint(tmp_path / "ckpts" / "final")
    for key in policy.params:
        np.testing.assert_array_equal(loaded.params[key], policy.params[key])
    assert summary.checkpoint_path == tmp_path / "ckpts" / "final"


def test_run_dir_collects_metrics_and_replayable_traces(tmp_path):
    run_dir = tmp_path / "run"
    policy = toybench.toy_policy(seed=6)
    summary = train(
        _config(epochs=2),
        policy,
        toybench.toy_executor(),
        instances=toybench.toy_dataset(4),
        run_dir=run_dir,
    )
    assert summary.metrics_path == run_dir / "metrics.jsonl"
    assert summary.traces_path == run_dir / "traces.jsonl"
    rows = [json.loads(l) for l in (run_dir / "metrics.jsonl").read_text().splitlines()]
    assert rows == list(summary.metrics)
    assert replay_check(run_dir / "traces.jsonl") == []


def test_on_step_sees_every_metric_row_and_may_abort():
    seen: list[dict] = []
    policy = toybench.toy_policy(seed=8)
    summary = train(
        _config(epochs=2),
        policy,
        toybench.toy_executor(),
        instances=toybench.toy_dataset(4),
        on_step=seen.append,
    )
    assert seen == list(summary.metrics)

    class StopEarly(Exception):
        pass

    def bail(row):
        raise StopEarly

    fresh = toybench.toy_policy(seed=8)
    with pytest.raises(StopEarly):
        train(
            _config(epochs=2),
            fresh,
            toybench.toy_executor(),
            instances=toybench.toy_dataset(4),
            on_step=bail,
        )


def test_non_trainable_policy_is_rejected():
    frozen = toybench.toy_policy(seed=0).snapshot(PolicyRole.REFERENCE)
    with pytest.raises(RoleError, match="trainable"):
        train(_config(), frozen, toybench.toy_executor(), instances=toybench.toy_dataset(2))


def test_policy_response_budget_is_enforced():
    policy = toybench.toy_policy(seed=0, max_new_tokens=8)
    with pytest.raises(ConfigError, match="seam_max_response_tokens"):
        train(
            _config(seam_max_response_tokens=4),
            policy,
            toybench.toy_executor(),
            instances=toybench.toy_dataset(2),
        )


def test_empty_instances_are_rejected():
    with pytest.raises(IngestionError, match="at least one"):
        train(_config(), toybench.toy_policy(), toybench.toy_executor(), instances=())


def test_training_moves_probability_toward_rewarded_text():
    """A few updates on the keyword bench raise the steered-entry probability."""
    policy = toybench.toy_policy(seed=0)
    instance = toybench.toy_dataset(1)[0]
    before = toybench.steered_probability(policy, instance, samples=400, seed=1)
    train(
        _config(epochs=10, batch_size=1, k_candidates=8),
        policy,
        toybench.toy_executor(),
        instances=toybench.toy_dataset(1),
    )
    after = toybench.steered_probability(policy, instance, samples=400, seed=1)
    assert after > before


# -- mapping-based construction ------------------------------------------------


def test_config_from_mapping_round_trips_types():
    config = config_from_mapping(
        {
            "dataset": "d.jsonl",
            "seed": "11",
            "epochs": "3",
            "learning_rate": "0.05",
            "ratio_level": "sequence",
            "kl_mode": "exact",
            "checkpoint_dir": "none",
            "checkpoint_interval": "5",
            "executor.kind": "scripted",
            "executor.rollouts_per_candidate": "2",
            "executor.timeout_s": "12.5",
        }
    )
    assert config.dataset == "d.jsonl"
    assert config.seed == 11
    assert config.epochs == 3
    assert config.learning_rate == 0.05
    assert config.ratio_level == "sequence"
    assert config.kl_mode == "exact"
    assert config.checkpoint_dir is None
    assert config.checkpoint_interval == 5
    assert config.executor.rollouts_per_candidate == 2
    assert config.executor.timeout_s == 12.5


def test_config_from_mapping_parses_booleans_and_none():
    # No boolean field exists on TrainConfig today; None-able fields do.
    config = config_from_mapping({"checkpoint_dir": "null"})
    assert config.checkpoint_dir is None
    config = config_from_mapping({"checkpoint_dir": "runs/ck"})
    assert config.checkpoint_dir == "runs/ck"


def test_config_from_mapping_collects_all_errors():
    with pytest.raises(ConfigError) as excinfo:
        config_from_mapping(
            {"seed": "not-a-number", "mystery_key": "1", "executor.parallelism": "x"}
        )
    message = str(excinfo.value)
    assert "seed" in message
    assert "mystery_key" in message
    assert "executor.parallelism" in message
