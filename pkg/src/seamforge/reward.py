"""Binary rollout reward: 1 iff the answer is right and the entry is complete.

Answer equivalence is deliberately narrow: exact rational/decimal arithmetic
plus whitespace- and wrapper-insensitive string comparison.  No symbolic
algebra — ``0.5`` equals ``1/2`` because both parse exactly, while ``x+1``
only ever equals the same string.
"""

from __future__ import annotations

import re
from fractions import Fraction
from statistics import fmean
from typing import TYPE_CHECKING, Sequence

from .errors import ConfigError
from .schema import (
    EXECUTOR_STYLES,
    STYLE_BOXED,
    STYLE_THINK_ANSWER,
    ExperienceEntry,
    ProblemInstance,
    check_completeness,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .executor import ExecutorRollout

_ANSWER_TAG_RE = re.compile(r"<answer>(.*?)</answer>", re.DOTALL)
_BOXED_MARKER = "\\boxed{"

# Wrappers stripped repeatedly from the outside in.
_MATH_WRAPPERS = (("$$", "$$"), ("$", "$"), ("\\(", "\\)"), ("\\[", "\\]"))
_FRAC_RE = re.compile(r"^\\[dt]?frac\{([+-]?\d+)\}\{([+-]?\d+)\}$")
_RATIO_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)$")


def _boxed_spans(text: str) -> list[str]:
    """All brace-balanced ``\\boxed{...}`` contents, in order of appearance."""
    spans: list[str] = []
    start = text.find(_BOXED_MARKER)
    while start != -1:
        depth = 1
        i = start + len(_BOXED_MARKER)
        while i < len(text) and depth:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            spans.append(text[start + len(_BOXED_MARKER) : i - 1])
        start = text.find(_BOXED_MARKER, start + 1)
    return spans


def extract_answer(output_text: str, style: str = STYLE_THINK_ANSWER) -> str | None:
    """Pull the final answer span out of executor output; None when absent.

    think-answer-tags: content of the last ``<answer>...</answer>`` pair.
    boxed: content of the last brace-balanced ``\\boxed{...}`` group.
    """
    if style == STYLE_THINK_ANSWER:
        matches = _ANSWER_TAG_RE.findall(output_text)
        return matches[-1].strip() if matches else None
    if style == STYLE_BOXED:
        spans = _boxed_spans(output_text)
        return spans[-1].strip() if spans else None
    raise ConfigError(
        f"unknown executor prompt style {style!r}; expected one of {EXECUTOR_STYLES}"
    )


def _outer_braces_match(text: str) -> bool:
    depth = 0
    for i, ch in enumerate(text):
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i == len(text) - 1
    return False


def _normalize_answer(answer: str) -> str:
    out = answer.strip().replace("−", "-")
    changed = True
    while changed and out:
        changed = False
        for left, right in _MATH_WRAPPERS:
            if (
                out.startswith(left)
                and out.endswith(right)
                and len(out) > len(left) + len(right)
            ):
                out = out[len(left) : -len(right)].strip()
                changed = True
        if out.startswith("{") and _outer_braces_match(out):
            out = out[1:-1].strip()
            changed = True
    return re.sub(r"\s+", " ", out)


def _as_rational(text: str) -> Fraction | None:
    if _DECIMAL_RE.match(text):
        return Fraction(text)
    for pattern in (_RATIO_RE, _FRAC_RE):
        match = pattern.match(text)
        if match:
            numerator, denominator = int(match.group(1)), int(match.group(2))
            if denominator == 0:
                return None
            return Fraction(numerator, denominator)
    return None


def answers_equal(candidate: str | None, target: str) -> bool:
    """Whether an extracted answer matches the target under exact-value rules."""
    if candidate is None:
        return False
    left = _normalize_answer(candidate)
    right = _normalize_answer(target)
    left_value = _as_rational(left)
    right_value = _as_rational(right)
    if left_value is not None and right_value is not None:
        return left_value == right_value
    return left == right


def compute_reward(
    rollout: "ExecutorRollout",
    entry: ExperienceEntry,
    instance: ProblemInstance,
) -> float:
    """Binary reward: 1.0 iff the rollout's answer is correct AND the entry is complete."""
    if not check_completeness(entry).complete:
        return 0.0
    return 1.0 if answers_equal(rollout.extracted_answer, instance.target) else 0.0


def aggregate_rewards(rewards: Sequence[float]) -> float:
    """Mean reward over a candidate's rollouts."""
    if len(rewards) == 0:
        raise ValueError("at least one rollout reward is required")
    return fmean(rewards)
