"""Structured experience entries: parsing, completeness checks, prompt rendering.

A guidance policy emits one *experience entry* per problem, carried inside
three literal tags::

    <analysis> short diagnosis </analysis>
    <experience> bullet list of distilled tips </experience>
    <example> numbered high-level solution steps </example>

Parsing is total — any byte string produces an entry, and whatever is missing
or empty is penalized by the reward layer rather than raised here.  Prompt
templates live as versioned text assets under ``seamforge/templates`` and are
rendered by literal placeholder substitution so that everything outside the
substitution sites stays byte-identical to the asset.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .errors import ConfigError

logger = logging.getLogger(__name__)

SECTION_ANALYSIS = "analysis"
SECTION_EXPERIENCE = "experience"
SECTION_EXAMPLE = "example"
SECTIONS = (SECTION_ANALYSIS, SECTION_EXPERIENCE, SECTION_EXAMPLE)

STYLE_THINK_ANSWER = "think-answer-tags"
STYLE_BOXED = "boxed"
EXECUTOR_STYLES = (STYLE_THINK_ANSWER, STYLE_BOXED)

# The generator prompt asks for 3-8 plan steps; outside that range we warn but
# never fail completeness.
PLAN_STEP_RANGE = (3, 8)

_TEMPLATE_PACKAGE = "seamforge.templates"
SEAM_TEMPLATE_ASSET = "seam_prompt.txt"
EXECUTOR_TEMPLATE_ASSETS = {
    STYLE_THINK_ANSWER: "executor_think_answer.txt",
    STYLE_BOXED: "executor_boxed.txt",
}

# Tag matching is case-sensitive and first-match-wins: the first well-formed
# span for each tag is the section, later repeats are ignored.
_TAG_RES = {
    name: re.compile(rf"<{name}>(.*?)</{name}>", re.DOTALL) for name in SECTIONS
}
_BULLET_RE = re.compile(r"^\s*[•\-\*]\s?(.*)$")
_STEP_RE = re.compile(r"^\s*\d+\s*\.\s?(.*)$")


@dataclass(frozen=True)
class ProblemInstance:
    """One task with a verifiable target answer."""

    id: str
    statement: str
    target: str
    domain_tag: str | None = None

    def __post_init__(self) -> None:
        if not self.statement:
            raise ValueError(f"instance {self.id!r} has an empty statement")


@dataclass(frozen=True)
class ExperienceEntry:
    """Parsed three-part guidance entry plus the exact text it came from."""

    analysis: str
    highlights: tuple[str, ...]
    plan: tuple[str, ...]
    raw_text: str
    token_count: int = 0

    def __post_init__(self) -> None:
        if self.token_count < 0:
            raise ValueError("token_count must be nonnegative")


@dataclass(frozen=True)
class SchemaReport:
    """Outcome of the structural-completeness check."""

    complete: bool
    missing_sections: tuple[str, ...]
    empty_sections: tuple[str, ...]


def _first_span(text: str, section: str) -> str | None:
    match = _TAG_RES[section].search(text)
    return None if match is None else match.group(1)


def _split_items(body: str, marker: re.Pattern[str]) -> tuple[str, ...]:
    """Split a section body into items that start at marker lines.

    Lines before the first marker are ignored; unmarked lines after a marker
    are continuations of the current item.
    """
    items: list[str] = []
    for line in body.splitlines():
        match = marker.match(line)
        if match:
            items.append(match.group(1))
        elif items and line.strip():
            items[-1] = items[-1] + "\n" + line
    return tuple(item.strip() for item in items)


def parse_experience(text: str, token_count: int = 0) -> ExperienceEntry:
    """Parse any string into an entry; absent or malformed sections come back empty."""
    analysis = _first_span(text, SECTION_ANALYSIS)
    experience = _first_span(text, SECTION_EXPERIENCE)
    example = _first_span(text, SECTION_EXAMPLE)
    return ExperienceEntry(
        analysis=(analysis or "").strip(),
        highlights=_split_items(experience or "", _BULLET_RE),
        plan=_split_items(example or "", _STEP_RE),
        raw_text=text,
        token_count=token_count,
    )


def render_entry(
    analysis: str,
    highlights: Sequence[str],
    plan: Sequence[str],
    token_count: int = 0,
) -> ExperienceEntry:
    """Compose canonical tagged text for the given sections and parse it back.

    The canonical layout uses one ``• `` bullet line per highlight and ``N. ``
    numbering per plan step, so ``parse_experience(entry.raw_text)`` round-trips.
    """
    lines = [f"<{SECTION_ANALYSIS}>", analysis, f"</{SECTION_ANALYSIS}>", ""]
    lines.append(f"<{SECTION_EXPERIENCE}>")
    lines.extend(f"• {item}" for item in highlights)
    lines.append(f"</{SECTION_EXPERIENCE}>")
    lines.append("")
    lines.append(f"<{SECTION_EXAMPLE}>")
    lines.extend(f"{i}. {step}" for i, step in enumerate(plan, start=1))
    lines.append(f"</{SECTION_EXAMPLE}>")
    return parse_experience("\n".join(lines), token_count=token_count)


def check_completeness(entry: ExperienceEntry) -> SchemaReport:
    """Report whether all three sections are present and carry non-whitespace content.

    A section with content (after stripping markers and whitespace) is neither
    missing nor empty, however the entry was built.  A contentless section is
    *missing* when its tag pair never appears in ``raw_text`` and *empty* when
    the tags are there but hold nothing.
    """
    has_content = {
        SECTION_ANALYSIS: bool(entry.analysis.strip()),
        SECTION_EXPERIENCE: any(h.strip() for h in entry.highlights),
        SECTION_EXAMPLE: any(s.strip() for s in entry.plan),
    }
    missing: list[str] = []
    empty: list[str] = []
    for name in SECTIONS:
        if has_content[name]:
            continue
        if _first_span(entry.raw_text, name) is None:
            missing.append(name)
        else:
            empty.append(name)

    if has_content[SECTION_EXAMPLE]:
        steps = sum(1 for s in entry.plan if s.strip())
        low, high = PLAN_STEP_RANGE
        if not low <= steps <= high:
            logger.warning(
                "plan has %d steps, outside the advisory %d-%d range", steps, low, high
            )

    return SchemaReport(
        complete=not missing and not empty,
        missing_sections=tuple(missing),
        empty_sections=tuple(empty),
    )


@lru_cache(maxsize=None)
def load_template(asset_name: str) -> str:
    """Load a prompt template asset verbatim (cached)."""
    return (
        resources.files(_TEMPLATE_PACKAGE).joinpath(asset_name).read_text(encoding="utf-8")
    )


def render_seam_prompt(instance: ProblemInstance) -> str:
    """Render the guidance-generator prompt for one instance.

    The statement is substituted verbatim at every ``{problem}`` site; an
    embedded ``</problem>`` would confuse a downstream reader, so it is logged
    but never escaped.
    """
    if "</problem>" in instance.statement:
        logger.warning(
            "statement of instance %s embeds '</problem>'; substituting verbatim",
            instance.id,
        )
    return load_template(SEAM_TEMPLATE_ASSET).replace("{problem}", instance.statement)


def render_executor_prompt(
    instance: ProblemInstance,
    entry: ExperienceEntry | None,
    style: str,
) -> str:
    """Render the frozen-executor prompt: guidance dialogue plus advisory instructions.

    ``entry`` may be ``None`` (or carry empty raw text) for unguided baselines,
    which leaves the advisory block blank.
    """
    try:
        asset = EXECUTOR_TEMPLATE_ASSETS[style]
    except KeyError:
        raise ConfigError(
            f"unknown executor prompt style {style!r}; expected one of {EXECUTOR_STYLES}"
        ) from None
    advisory = entry.raw_text if entry is not None else ""
    template = load_template(asset)
    return template.replace("{problem}", instance.statement).replace(
        "{experience}", advisory
    )
