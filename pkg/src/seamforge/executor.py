"""Frozen executors: deterministic scripted rule tables and a remote HTTP backend.

The executor is never trained.  Scripted executors make desk-scale experiments
exact: a first-match rule table maps (instance, guidance entry) to an answer,
formatted in the configured prompt style so the answer-extraction path is
exercised end to end.  The remote executor speaks a single-endpoint JSON
protocol and degrades gracefully — after exhausting retries, rollouts come
back failed and the reward pipeline scores them 0.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import requests

from .errors import ConfigError, TransportError
from .reward import extract_answer
from .schema import (
    EXECUTOR_STYLES,
    STYLE_BOXED,
    STYLE_THINK_ANSWER,
    ExperienceEntry,
    ProblemInstance,
    render_executor_prompt,
)

logger = logging.getLogger(__name__)

KIND_SCRIPTED = "scripted"
KIND_REMOTE = "remote"
EXECUTOR_KINDS = (KIND_SCRIPTED, KIND_REMOTE)

_T = TypeVar("_T")
_R = TypeVar("_R")


@dataclass(frozen=True)
class ExecutorRollout:
    """One executor attempt on one (instance, entry) pair."""

    output_text: str
    extracted_answer: str | None
    latency_seconds: float
    error: str | None = None


@dataclass(frozen=True)
class ExecutorConfig:
    kind: str = KIND_SCRIPTED
    temperature: float = 0.0
    max_output_tokens: int = 8192
    rollouts_per_candidate: int = 1
    prompt_style: str = STYLE_THINK_ANSWER
    endpoint: str | None = None
    timeout_s: float = 30.0
    retries: int = 3
    parallelism: int = 1

    def __post_init__(self) -> None:
        problems = validate_executor_config(self)
        if problems:
            raise ConfigError("; ".join(problems))


def validate_executor_config(config: "ExecutorConfig") -> list[str]:
    """All violations in one pass, phrased by key name."""
    problems = []
    if config.kind not in EXECUTOR_KINDS:
        problems.append(f"executor.kind must be one of {EXECUTOR_KINDS}, got {config.kind!r}")
    if config.temperature < 0:
        problems.append("executor.temperature must be ≥ 0")
    if config.max_output_tokens < 1:
        problems.append("executor.max_output_tokens must be ≥ 1")
    if config.rollouts_per_candidate < 1:
        problems.append("executor.rollouts_per_candidate must be ≥ 1")
    if config.prompt_style not in EXECUTOR_STYLES:
        problems.append(
            f"executor.prompt_style must be one of {EXECUTOR_STYLES}, got {config.prompt_style!r}"
        )
    if config.timeout_s <= 0:
        problems.append("executor.timeout_s must be > 0")
    if config.retries < 0:
        problems.append("executor.retries must be ≥ 0")
    if config.parallelism < 1:
        problems.append("executor.parallelism must be ≥ 1")
    if config.kind == KIND_REMOTE and not config.endpoint:
        problems.append("executor.endpoint is required when executor.kind is 'remote'")
    return problems


@dataclass(frozen=True)
class ScriptedRule:
    """First-match rule: a predicate over (instance, entry) plus the answer it yields."""

    predicate: Callable[[ProblemInstance, ExperienceEntry], bool]
    answer: str | Callable[[ProblemInstance, ExperienceEntry], str]


def format_scripted_output(answer: str, style: str) -> str:
    if style == STYLE_THINK_ANSWER:
        return f"<think>rule-table lookup</think><answer>{answer}</answer>"
    if style == STYLE_BOXED:
        return f"By the rule table, the answer is \\boxed{{{answer}}}."
    raise ConfigError(f"unknown executor prompt style {style!r}")


class ScriptedExecutor:
    """Pure-function executor over a rule table.

    The prompt is still rendered on every call for interface parity with the
    remote path; the rules themselves look at the instance and the parsed
    entry directly.  ``fixed_latency`` substitutes a synthetic per-rollout
    latency for timing-sensitive narratives.
    """

    def __init__(
        self,
        rules: Sequence[ScriptedRule],
        config: ExecutorConfig | None = None,
        *,
        miss_answer: str = "unsolved",
        fixed_latency: float | None = None,
    ):
        self.rules = tuple(rules)
        self.config = config or ExecutorConfig(kind=KIND_SCRIPTED)
        if self.config.kind != KIND_SCRIPTED:
            raise ConfigError("ScriptedExecutor requires executor.kind 'scripted'")
        self.miss_answer = miss_answer
        self.fixed_latency = fixed_latency

    def _answer_for(self, instance: ProblemInstance, entry: ExperienceEntry) -> str:
        for rule in self.rules:
            if rule.predicate(instance, entry):
                if callable(rule.answer):
                    return rule.answer(instance, entry)
                return rule.answer
        return self.miss_answer

    def solve(self, instance: ProblemInstance, entry: ExperienceEntry) -> list[ExecutorRollout]:
        render_executor_prompt(instance, entry, self.config.prompt_style)
        rollouts = []
        for _ in range(self.config.rollouts_per_candidate):
            start = time.perf_counter()
            answer = self._answer_for(instance, entry)
            text = format_scripted_output(answer, self.config.prompt_style)
            extracted = extract_answer(text, self.config.prompt_style)
            latency = (
                self.fixed_latency
                if self.fixed_latency is not None
                else time.perf_counter() - start
            )
            rollouts.append(ExecutorRollout(text, extracted, latency))
        return rollouts


class RemoteExecutor:
    """HTTP executor for a real frozen model behind one JSON endpoint.

    Request:  ``{"prompt": str, "temperature": float, "max_tokens": int, "n": int}``
    Response: ``{"generations": [str, ...], "usage": {...}?}``

    One request serves a whole rollout batch (``n`` = rollouts per candidate).
    Transport failures, 5xx/429 statuses, and malformed bodies are retried
    with exponential backoff; other 4xx statuses fail immediately.  A request
    that still fails after retries yields failed rollouts (empty output, no
    answer) rather than raising into the training loop.
    """

    def __init__(
        self,
        config: ExecutorConfig,
        *,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base_s: float = 0.25,
    ):
        if config.kind != KIND_REMOTE:
            raise ConfigError("RemoteExecutor requires executor.kind 'remote'")
        self.config = config
        self.session = session or requests.Session()
        self._sleep = sleep
        self._backoff_base_s = backoff_base_s

    def _request(self, prompt: str, n: int) -> list[str]:
        payload = {
            "prompt": prompt,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
            "n": n,
        }
        last_error = "request never attempted"
        for attempt in range(self.config.retries + 1):
            if attempt:
                self._sleep(self._backoff_base_s * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    self.config.endpoint, json=payload, timeout=self.config.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                logger.warning("remote executor attempt %d failed: %s", attempt + 1, last_error)
                continue
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"retryable status {response.status_code}"
                logger.warning("remote executor attempt %d failed: %s", attempt + 1, last_error)
                continue
            if not 200 <= response.status_code < 300:
                raise TransportError(f"endpoint rejected request with status {response.status_code}")
            try:
                body = response.json()
            except ValueError:
                last_error = "response body is not JSON"
                logger.warning("remote executor attempt %d failed: %s", attempt + 1, last_error)
                continue
            generations = body.get("generations") if isinstance(body, dict) else None
            if not isinstance(generations, list) or not all(
                isinstance(g, str) for g in generations
            ):
                last_error = "response missing a 'generations' list of strings"
                logger.warning("remote executor attempt %d failed: %s", attempt + 1, last_error)
                continue
            if len(generations) < n:
                last_error = f"endpoint returned {len(generations)} generations, wanted {n}"
                logger.warning("remote executor attempt %d failed: %s", attempt + 1, last_error)
                continue
            return generations[:n]
        raise TransportError(last_error)

    def solve(self, instance: ProblemInstance, entry: ExperienceEntry) -> list[ExecutorRollout]:
        prompt = render_executor_prompt(instance, entry, self.config.prompt_style)
        n = self.config.rollouts_per_candidate
        start = time.perf_counter()
        try:
            texts = self._request(prompt, n)
        except TransportError as exc:
            share = (time.perf_counter() - start) / n
            logger.warning("remote executor gave up on instance %s: %s", instance.id, exc)
            return [ExecutorRollout("", None, share, error=str(exc)) for _ in range(n)]
        share = (time.perf_counter() - start) / n
        return [
            ExecutorRollout(text, extract_answer(text, self.config.prompt_style), share)
            for text in texts
        ]


def scripted_behavior(
    rule_table: Sequence[ScriptedRule],
    config: ExecutorConfig | None = None,
    **overrides,
) -> ScriptedExecutor:
    """Build a deterministic executor from a rule table (plus config overrides)."""
    return ScriptedExecutor(rule_table, config, **overrides)


def run_parallel(fn: Callable[[_T], _R], items: Iterable[_T], parallelism: int) -> list[_R]:
    """Order-preserving map over a bounded worker pool; serial when parallelism ≤ 1."""
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))
