"""seamforge: train a lightweight guidance policy that steers a frozen executor.

The policy writes structured "experience entries" — analysis, highlights, and
a worked plan — that are prepended to a downstream executor's prompt.  It is
trained purely from binary task rewards with group-normalized advantages and
a clipped surrogate, and can keep evolving at deployment time by refitting on
its own logged successes.
"""

from __future__ import annotations

from .errors import (
    ConfigError,
    IngestionError,
    LengthError,
    RoleError,
    SeamforgeError,
    StorageError,
    TrainingError,
    TransportError,
)
from .evalkit import (
    ComparisonReport,
    EvalReport,
    InstanceResult,
    ScalingPoint,
    SweepReport,
    compare_conditions,
    compute_ttc,
    emit_report,
    evaluate,
    scaling_sweep,
)
from .evolve import (
    EvolutionProtocol,
    EvolutionSummary,
    SuccessBuffer,
    SuccessRecord,
    log_success,
    run_evolution,
    sft_loss,
    sft_loss_grads,
    split_dataset,
)
from .executor import (
    ExecutorConfig,
    ExecutorRollout,
    RemoteExecutor,
    ScriptedExecutor,
    ScriptedRule,
    run_parallel,
    scripted_behavior,
    validate_executor_config,
)
from .grpo import (
    AdvantageVector,
    GroupBatch,
    GrpoLossStats,
    clipped_surrogate,
    compute_advantages,
    exact_kl_terms,
    grpo_loss,
    grpo_loss_grads,
    importance_ratio,
    kl_penalty,
)
from .policy import (
    AdamOptimizer,
    MicroLMConfig,
    MicroPolicy,
    MicroTokenizer,
    PolicyRole,
    SgdOptimizer,
    TokenSequence,
)
from .reward import aggregate_rewards, answers_equal, compute_reward, extract_answer
from .rewardlog import Discrepancy, GroupTrace, TraceStore, read_traces, replay_check
from .schema import (
    ExperienceEntry,
    ProblemInstance,
    SchemaReport,
    check_completeness,
    parse_experience,
    render_entry,
    render_executor_prompt,
    render_seam_prompt,
)
from .trainer import (
    TrainConfig,
    TrainSummary,
    generate,
    ingest_dataset,
    train,
    validate_train_config,
)

__version__ = "0.1.0"

__all__ = [
    "AdvantageVector",
    "ComparisonReport",
    "ConfigError",
    "Discrepancy",
    "EvalReport",
    "EvolutionProtocol",
    "EvolutionSummary",
    "ExecutorConfig",
    "ExecutorRollout",
    "AdamOptimizer",
    "ExperienceEntry",
    "GroupBatch",
    "GroupTrace",
    "GrpoLossStats",
    "IngestionError",
    "InstanceResult",
    "LengthError",
    "MicroLMConfig",
    "MicroPolicy",
    "MicroTokenizer",
    "PolicyRole",
    "ProblemInstance",
    "RemoteExecutor",
    "RoleError",
    "ScalingPoint",
    "SchemaReport",
    "ScriptedExecutor",
    "ScriptedRule",
    "SeamforgeError",
    "SgdOptimizer",
    "StorageError",
    "SuccessBuffer",
    "SuccessRecord",
    "SweepReport",
    "TokenSequence",
    "TraceStore",
    "TrainConfig",
    "TrainSummary",
    "TrainingError",
    "TransportError",
    "aggregate_rewards",
    "answers_equal",
    "check_completeness",
    "clipped_surrogate",
    "compare_conditions",
    "compute_advantages",
    "exact_kl_terms",
    "compute_reward",
    "compute_ttc",
    "emit_report",
    "evaluate",
    "extract_answer",
    "generate",
    "grpo_loss",
    "grpo_loss_grads",
    "importance_ratio",
    "ingest_dataset",
    "kl_penalty",
    "log_success",
    "parse_experience",
    "read_traces",
    "render_entry",
    "render_executor_prompt",
    "render_seam_prompt",
    "replay_check",
    "run_evolution",
    "run_parallel",
    "scaling_sweep",
    "scripted_behavior",
    "sft_loss",
    "sft_loss_grads",
    "split_dataset",
    "train",
    "validate_executor_config",
    "validate_train_config",
]
