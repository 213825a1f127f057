"""Command-line entry point tying the pipeline together.

One executable, six subcommands: train, eval, evolve, generate, sweep,
report.  Configuration is a flat ``key=value`` file whose keys mirror the
training config (dotted ``executor.*`` and ``policy.*`` for the nested
pieces); every key can also arrive as an environment variable
(``SEAMFORGE_<KEY>`` with dots as underscores) or a ``--kebab-case`` flag,
with ascending precedence file < environment < flags.

Failures map to stable exit codes: 2 configuration, 3 ingestion,
4 training, 5 storage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
import time
from dataclasses import asdict, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import ConfigError, SeamforgeError, StorageError
from .evalkit import (
    ComparisonReport,
    ConditionResult,
    EvalReport,
    InstanceResult,
    ScalingPoint,
    SweepReport,
    emit_report,
    evaluate,
    scaling_sweep,
)
from .evolve import EvolutionProtocol, run_evolution
from .executor import ExecutorConfig, KIND_REMOTE, KIND_SCRIPTED, RemoteExecutor, ScriptedExecutor
from .policy import MicroLMConfig, MicroPolicy, MicroTokenizer, PolicyRole
from .toybench import keyword_steering_rules, toy_tokenizer
from .trainer import (
    TrainConfig,
    config_from_mapping,
    generate,
    ingest_dataset,
    train,
    validate_train_config,
)

logger = logging.getLogger(__name__)

ENV_PREFIX = "SEAMFORGE_"
_ENV_IGNORED = {"BUILD_ID"}  # operational variables, not config keys

_POLICY_DEFAULTS = {
    "vocab": "toy",
    "embed_dim": "8",
    "hidden_dim": "24",
    "max_new_tokens": "6",
    "checkpoint": "none",
}

_TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig) if f.name != "executor")
_EXECUTOR_KEYS = tuple(f.name for f in fields(ExecutorConfig))
_POLICY_KEYS = tuple(_POLICY_DEFAULTS)


# -- configuration plumbing ---------------------------------------------------


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment; blank lines ignored."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    mapping: dict[str, str] = {}
    problems: list[str] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            problems.append(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
            continue
        mapping[key.strip()] = value.strip()
    if problems:
        raise ConfigError("; ".join(problems))
    return mapping


def _env_to_key(name: str) -> str | None:
    lower = name.lower()
    if lower in _TRAIN_KEYS:
        return lower
    for prefix, known in (("executor_", _EXECUTOR_KEYS), ("policy_", _POLICY_KEYS)):
        if lower.startswith(prefix) and lower[len(prefix) :] in known:
            return prefix[:-1] + "." + lower[len(prefix) :]
    return None


def collect_env(environ: dict[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    mapping: dict[str, str] = {}
    problems: list[str] = []
    for name, value in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        stem = name[len(ENV_PREFIX) :]
        if stem in _ENV_IGNORED:
            continue
        key = _env_to_key(stem)
        if key is None:
            problems.append(f"unknown environment variable {name}")
            continue
        mapping[key] = value
    if problems:
        raise ConfigError("; ".join(problems))
    return mapping


def _split_policy_keys(mapping: dict[str, str]) -> tuple[dict[str, str], dict[str, str]]:
    config_map: dict[str, str] = {}
    policy_map = dict(_POLICY_DEFAULTS)
    problems: list[str] = []
    for key, value in mapping.items():
        if key.startswith("policy."):
            name = key[len("policy.") :]
            if name not in _POLICY_DEFAULTS:
                problems.append(f"unknown config key {key!r}")
                continue
            policy_map[name] = value
        else:
            config_map[key] = value
    if problems:
        raise ConfigError("; ".join(problems))
    return config_map, policy_map


def resolve_config(
    config_path: str | Path | None,
    flag_overrides: dict[str, str] | None = None,
    *,
    environ: dict[str, str] | None = None,
) -> tuple[TrainConfig, dict[str, str]]:
    """Merge defaults < file < environment < flags into a validated config."""
    merged: dict[str, str] = {}
    if config_path is not None:
        merged.update(parse_config_file(config_path))
    merged.update(collect_env(environ))
    merged.update(flag_overrides or {})
    config_map, policy_map = _split_policy_keys(merged)
    config = config_from_mapping(config_map)
    problems = validate_train_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    return config, policy_map


def validate_config(path: str | Path | None) -> TrainConfig:
    """Resolve a config file on its own; raises with every violation listed."""
    config, _ = resolve_config(path, environ={})
    return config


def config_to_mapping(config: TrainConfig) -> dict[str, str]:
    """Flatten a config back to the file format (the idempotence surface)."""
    mapping: dict[str, str] = {}
    for key, value in asdict(config).items():
        if key == "executor":
            for inner, inner_value in value.items():
                mapping[f"executor.{inner}"] = _format_value(inner_value)
        else:
            mapping[key] = _format_value(value)
    return mapping


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# -- run directory ------------------------------------------------------------


def _build_id() -> str:
    override = os.environ.get(ENV_PREFIX + "BUILD_ID")
    if override:
        return override
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "ts": round(time.time(), 3),
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
            },
            sort_keys=True,
        )


class RunDirectory:
    """Exclusive owner of one run's artifacts.

    Creating the directory takes a lock file with O_CREAT|O_EXCL, so two
    processes can never share a run directory and a directory is never run
    twice; the manifest written on exit lists every artifact the run
    produced.
    """

    def __init__(self, path: str | Path, subcommand: str, argv: list[str], config: dict):
        self.path = Path(path)
        self.subcommand = subcommand
        self.argv = argv
        self.config = config
        self.exit_code = 0
        self._handlers: list[logging.Handler] = []
        self._started = _utc_now()
        try:
            self.path.mkdir(parents=True, exist_ok=True)
            fd = os.open(self.path / ".lock", os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StorageError(
                f"run directory {self.path} is already in use (found .lock)"
            ) from None
        except OSError as exc:
            raise StorageError(f"cannot prepare run directory {self.path}: {exc}") from exc
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")

    def __enter__(self) -> "RunDirectory":
        handler = logging.FileHandler(self.path / "log.jsonl", encoding="utf-8")
        handler.setFormatter(_JsonLineFormatter())
        for name in ("seamforge", "py.warnings"):
            log = logging.getLogger(name)
            log.addHandler(handler)
            log.setLevel(logging.INFO)
        logging.captureWarnings(True)
        self._handlers.append(handler)
        return self

    def __exit__(self, exc_type, exc, _tb) -> None:
        if isinstance(exc, SeamforgeError):
            self.exit_code = exc.exit_code
        elif exc is not None:
            self.exit_code = 1
        logging.captureWarnings(False)
        for handler in self._handlers:
            for name in ("seamforge", "py.warnings"):
                logging.getLogger(name).removeHandler(handler)
            handler.close()
        self._write_manifest()

    def _artifacts(self) -> list[str]:
        found = []
        for file in sorted(self.path.rglob("*")):
            if file.is_dir():
                continue
            rel = file.relative_to(self.path).as_posix()
            if rel in ("manifest.json", ".lock"):
                continue
            found.append(rel)
        return found

    def _write_manifest(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "argv": self.argv,
            "config": self.config,
            "version": __version__,
            "build_id": _build_id(),
            "started_at": self._started,
            "ended_at": _utc_now(),
            "exit_code": self.exit_code,
            "artifacts": self._artifacts(),
        }
        (self.path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


# -- object construction ------------------------------------------------------


def build_executor(config: ExecutorConfig):
    if config.kind == KIND_SCRIPTED:
        return ScriptedExecutor(keyword_steering_rules(), config, miss_answer="no idea")
    if config.kind == KIND_REMOTE:
        return RemoteExecutor(config)
    raise ConfigError(f"executor.kind must be one of ('{KIND_SCRIPTED}', '{KIND_REMOTE}')")


def _load_fragments(path: str) -> MicroTokenizer:
    try:
        fragments = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read vocabulary file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"vocabulary file {path} is not valid JSON: {exc}") from exc
    if not isinstance(fragments, list) or not all(isinstance(f, str) for f in fragments):
        raise ConfigError(f"vocabulary file {path} must hold a JSON list of strings")
    return MicroTokenizer(fragments)


def build_policy(
    policy_map: dict[str, str],
    seed: int,
    *,
    role: PolicyRole = PolicyRole.TRAINABLE,
) -> MicroPolicy:
    checkpoint = policy_map.get("checkpoint", "none")
    if checkpoint and checkpoint.lower() not in ("none", "null", ""):
        return MicroPolicy.load_checkpoint(checkpoint, role=role)
    vocab = policy_map.get("vocab", "toy")
    tokenizer = toy_tokenizer() if vocab == "toy" else _load_fragments(vocab)
    try:
        embed_dim = int(policy_map["embed_dim"])
        hidden_dim = int(policy_map["hidden_dim"])
        max_new_tokens = int(policy_map["max_new_tokens"])
    except ValueError as exc:
        raise ConfigError(f"policy.* keys must be integers: {exc}") from exc
    config = MicroLMConfig(
        vocab_size=tokenizer.vocab_size, embed_dim=embed_dim, hidden_dim=hidden_dim
    )
    return MicroPolicy(
        tokenizer, config, role=role, max_new_tokens=max_new_tokens, seed=seed
    )


# -- argument parsing ---------------------------------------------------------


def _flag_name(key: str) -> str:
    return "--" + key.replace(".", "-").replace("_", "-")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    group = parser.add_argument_group("config overrides")
    for key in _TRAIN_KEYS:
        group.add_argument(_flag_name(key), dest=f"cfg::{key}", metavar="V")
    for key in _EXECUTOR_KEYS:
        group.add_argument(_flag_name(f"executor.{key}"), dest=f"cfg::executor.{key}", metavar="V")
    for key in _POLICY_KEYS:
        group.add_argument(_flag_name(f"policy.{key}"), dest=f"cfg::policy.{key}", metavar="V")


def _flag_overrides(args: argparse.Namespace) -> dict[str, str]:
    overrides = {}
    for dest, value in vars(args).items():
        if dest.startswith("cfg::") and value is not None:
            overrides[dest[len("cfg::") :]] = value
    return overrides


def _formats(arg: str) -> list[str]:
    return [part.strip() for part in arg.split(",") if part.strip()]


def _int_list(arg: str) -> list[int]:
    try:
        return [int(part) for part in arg.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seamforge",
        description="Train and evaluate a guidance policy that steers a frozen executor.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_train = sub.add_parser("train", help="run the reward-driven training loop")
    _add_config_flags(p_train)
    p_train.add_argument("--run-dir", required=True, metavar="DIR")
    p_train.set_defaults(handler=_cmd_train)

    p_eval = sub.add_parser("eval", help="measure accuracy, latency, and time-to-correct")
    _add_config_flags(p_eval)
    p_eval.add_argument("--run-dir", required=True, metavar="DIR")
    p_eval.add_argument("--checkpoint", metavar="DIR", help="policy checkpoint; omit for the no-guidance baseline")
    p_eval.add_argument("--runs", type=int, default=10)
    p_eval.add_argument("--subsample-fraction", type=float, default=1.0)
    p_eval.add_argument("--format", default="json,csv", metavar="F[,F]")
    p_eval.set_defaults(handler=_cmd_eval)

    p_evolve = sub.add_parser("evolve", help="stream, log successes, and refit the policy")
    _add_config_flags(p_evolve)
    p_evolve.add_argument("--run-dir", required=True, metavar="DIR")
    p_evolve.add_argument("--stream-fraction", type=float, default=EvolutionProtocol.stream_fraction)
    p_evolve.add_argument("--buffer-cap", type=int, default=EvolutionProtocol.buffer_cap)
    p_evolve.add_argument("--max-rounds", type=int, default=EvolutionProtocol.max_rounds)
    p_evolve.add_argument("--sft-steps", type=int, default=EvolutionProtocol.sft_steps)
    p_evolve.add_argument("--micro-batch", type=int, default=EvolutionProtocol.micro_batch)
    p_evolve.add_argument("--sft-learning-rate", type=float, default=EvolutionProtocol.sft_learning_rate)
    p_evolve.add_argument("--stream-temperature", type=float, default=EvolutionProtocol.stream_temperature)
    p_evolve.add_argument("--interleaved-sft", action="store_true")
    p_evolve.add_argument("--loss-reduction", choices=("mean", "sum"), default="mean")
    p_evolve.add_argument("--eval-runs", type=int, default=1)
    p_evolve.set_defaults(handler=_cmd_evolve)

    p_generate = sub.add_parser("generate", help="print a greedy experience entry per instance")
    _add_config_flags(p_generate)
    p_generate.add_argument("--instance-file", required=True, metavar="FILE")
    p_generate.set_defaults(handler=_cmd_generate)

    p_sweep = sub.add_parser("sweep", help="accuracy as a function of training-set size")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--run-dir", required=True, metavar="DIR")
    p_sweep.add_argument("--sizes", type=_int_list, required=True, metavar="N[,N]")
    p_sweep.add_argument("--sweep-seeds", type=_int_list, default=[0], metavar="S[,S]")
    p_sweep.add_argument("--train-dataset", metavar="FILE", help="defaults to the config dataset")
    p_sweep.add_argument("--eval-dataset", metavar="FILE", required=True)
    p_sweep.add_argument("--format", default="json,csv,plot", metavar="F[,F]")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_report = sub.add_parser("report", help="re-emit a stored report in other formats")
    p_report.add_argument("--input", required=True, metavar="REPORT.JSON")
    p_report.add_argument("--out-dir", metavar="DIR", help="defaults next to the input")
    p_report.add_argument("--format", default="csv", metavar="F[,F]")
    p_report.set_defaults(handler=_cmd_report)
    return parser


# -- subcommand handlers ------------------------------------------------------


def _cmd_train(args: argparse.Namespace) -> int:
    config, policy_map = resolve_config(args.config, _flag_overrides(args))
    if not config.dataset:
        raise ConfigError("dataset must point to a JSONL file")
    instances = ingest_dataset(config.dataset)
    policy = build_policy(policy_map, config.seed)
    executor = build_executor(config.executor)
    run_dir = Path(args.run_dir)
    if not config.checkpoint_dir:
        config = replace(config, checkpoint_dir=str(run_dir / "checkpoints"))
    with RunDirectory(run_dir, "train", _argv_of(args), _manifest_config(config, policy_map)):
        summary = train(config, policy, executor, instances=instances, run_dir=run_dir)
        logger.info(
            "trained %d updates; final loss %.6f, mean reward %.4f",
            summary.updates,
            summary.final_loss,
            summary.final_mean_reward,
        )
        print(
            json.dumps(
                {
                    "steps": summary.steps,
                    "updates": summary.updates,
                    "final_loss": summary.final_loss,
                    "final_mean_reward": summary.final_mean_reward,
                    "checkpoint": str(summary.checkpoint_path),
                },
                sort_keys=True,
            )
        )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config, policy_map = resolve_config(args.config, _flag_overrides(args))
    if not config.dataset:
        raise ConfigError("dataset must be given via --dataset or the config file")
    dataset = ingest_dataset(config.dataset)
    policy = None
    if args.checkpoint:
        policy = MicroPolicy.load_checkpoint(args.checkpoint, role=PolicyRole.REFERENCE)
    executor = build_executor(config.executor)
    with RunDirectory(Path(args.run_dir), "eval", _argv_of(args), _manifest_config(config, policy_map)) as run:
        report = evaluate(
            policy,
            dataset,
            executor,
            n_runs=args.runs,
            seed=config.seed,
            subsample_fraction=args.subsample_fraction,
        )
        emit_report(report, run.path, _formats(args.format))
        logger.info("accuracy %.4f over %d run(s)", report.accuracy, report.runs)
        print(
            json.dumps(
                {
                    "accuracy": report.accuracy,
                    "mean_latency": report.mean_latency,
                    "ttc_seconds": report.ttc_seconds,
                    "runs": report.runs,
                },
                sort_keys=True,
            )
        )
    return 0


def _cmd_evolve(args: argparse.Namespace) -> int:
    config, policy_map = resolve_config(args.config, _flag_overrides(args))
    if not config.dataset:
        raise ConfigError("dataset must point to a JSONL file")
    dataset = ingest_dataset(config.dataset)
    protocol = EvolutionProtocol(
        stream_fraction=args.stream_fraction,
        max_rounds=args.max_rounds,
        buffer_cap=args.buffer_cap,
        sft_steps=args.sft_steps,
        micro_batch=args.micro_batch,
        sft_learning_rate=args.sft_learning_rate,
        stream_temperature=args.stream_temperature,
        interleaved_sft=args.interleaved_sft,
        loss_reduction=args.loss_reduction,
    )
    policy = build_policy(policy_map, config.seed)
    executor = build_executor(config.executor)
    with RunDirectory(Path(args.run_dir), "evolve", _argv_of(args), _manifest_config(config, policy_map)) as run:
        summary = run_evolution(
            protocol,
            dataset,
            policy,
            executor,
            seed=config.seed,
            buffer_path=run.path / "buffer.jsonl",
            eval_runs=args.eval_runs,
        )
        policy.save_checkpoint(run.path / "checkpoints" / "final")
        payload = asdict(summary)
        (run.path / "summary.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        logger.info(
            "evolution: buffer %d, accuracy %.4f -> %.4f",
            summary.buffer_size,
            summary.pre_accuracy,
            summary.post_accuracy,
        )
        print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    config, policy_map = resolve_config(args.config, _flag_overrides(args))
    instances = ingest_dataset(args.instance_file)
    policy = build_policy(policy_map, config.seed)
    for index, instance in enumerate(instances):
        entry = generate(policy, instance, max_prompt_tokens=config.seam_max_prompt_tokens)
        if index:
            print()
        print(entry.raw_text)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config, policy_map = resolve_config(args.config, _flag_overrides(args))
    train_path = args.train_dataset or config.dataset
    if not train_path:
        raise ConfigError("training dataset must be given via --train-dataset or the config file")
    train_pool = ingest_dataset(train_path)
    eval_pool = ingest_dataset(args.eval_dataset)
    executor = build_executor(config.executor)

    def factory(seed: int) -> MicroPolicy:
        return build_policy(policy_map, seed)

    with RunDirectory(Path(args.run_dir), "sweep", _argv_of(args), _manifest_config(config, policy_map)) as run:
        report = scaling_sweep(
            train_pool,
            args.sizes,
            config,
            eval_pool,
            executor,
            seeds=args.sweep_seeds,
            policy_factory=factory,
        )
        emit_report(report, run.path, _formats(args.format))
        logger.info("sweep finished: %d points", len(report.points))
        print(
            json.dumps(
                {
                    "sizes": list(report.sizes),
                    "seeds": list(report.seeds),
                    "points": [asdict(p) for p in report.points],
                },
                sort_keys=True,
            )
        )
    return 0


def _report_from_json(payload: dict):
    if "points" in payload:
        return SweepReport(
            sizes=tuple(payload["sizes"]),
            seeds=tuple(payload["seeds"]),
            points=tuple(ScalingPoint(**p) for p in payload["points"]),
        )
    if "conditions" in payload:
        return ComparisonReport(
            baseline=payload["baseline"],
            baseline_zero=payload["baseline_zero"],
            conditions=tuple(
                ConditionResult(
                    name=c["name"],
                    accuracy=c["accuracy"],
                    absolute_delta=c["absolute_delta"],
                    relative_gain_pct=c["relative_gain_pct"],
                    report=_report_from_json(c["report"]),
                )
                for c in payload["conditions"]
            ),
        )
    if "per_instance" in payload:
        return EvalReport(
            per_instance=tuple(InstanceResult(**r) for r in payload["per_instance"]),
            run_accuracies=tuple(payload["run_accuracies"]),
            accuracy=payload["accuracy"],
            mean_latency=payload["mean_latency"],
            ttc_seconds=payload["ttc_seconds"],
            runs=payload["runs"],
            run_seeds=tuple(payload["run_seeds"]),
        )
    raise ConfigError("input file does not look like a known report shape")


def _cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.input)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StorageError(f"cannot read report {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"report {path} is not valid JSON: {exc}") from exc
    report = _report_from_json(payload)
    out_dir = Path(args.out_dir) if args.out_dir else path.parent
    written = emit_report(report, out_dir, _formats(args.format))
    for file in written:
        print(file)
    return 0


# -- dispatch -----------------------------------------------------------------


def _argv_of(args: argparse.Namespace) -> list[str]:
    return list(getattr(args, "_argv", []))


def _manifest_config(config: TrainConfig, policy_map: dict[str, str]) -> dict:
    merged = dict(config_to_mapping(config))
    merged.update({f"policy.{k}": v for k, v in policy_map.items()})
    return merged


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("seamforge")
    root.addHandler(stderr_handler)
    root.setLevel(logging.INFO)
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code) if exc.code else 0
        args._argv = argv
        try:
            return args.handler(args)
        except SeamforgeError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return exc.exit_code
    finally:
        root.removeHandler(stderr_handler)
        stderr_handler.close()


def main() -> None:
    raise SystemExit(dispatch())
