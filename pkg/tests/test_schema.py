"""Entry parsing, completeness reports, and template rendering."""

from __future__ import annotations

import logging
from pathlib import Path

import pytest

from seamforge import (
    ConfigError,
    ExperienceEntry,
    ProblemInstance,
    SchemaReport,
    check_completeness,
    parse_experience,
    render_entry,
    render_executor_prompt,
    render_seam_prompt,
)
from seamforge.schema import (
    EXECUTOR_TEMPLATE_ASSETS,
    SEAM_TEMPLATE_ASSET,
    STYLE_BOXED,
    STYLE_THINK_ANSWER,
    load_template,
)

GOLDEN = Path(__file__).parent / "golden"

WELL_FORMED = """<analysis>
The task reduces to a lookup.
</analysis>

<experience>
• decompose the question into cases
• check the boundary rows
</experience>

<example>
1. restate the goal
2. scan the table
3. report the match
</example>"""


def test_parse_well_formed_entry():
    entry = parse_experience(WELL_FORMED, token_count=12)
    assert entry.analysis == "The task reduces to a lookup."
    assert entry.highlights == (
        "decompose the question into cases",
        "check the boundary rows",
    )
    assert entry.plan == ("restate the goal", "scan the table", "report the match")
    assert entry.raw_text == WELL_FORMED
    assert entry.token_count == 12


def test_parse_is_total_on_arbitrary_text():
    for text in ["", "no tags at all", "<analysis> unclosed", "\x00\xff binary-ish"]:
        entry = parse_experience(text)
        assert isinstance(entry, ExperienceEntry)
        assert entry.raw_text == text
        assert entry.analysis == ""
        assert entry.highlights == ()
        assert entry.plan == ()


def test_tags_are_case_sensitive():
    text = "<Analysis>loud</Analysis><ANALYSIS>louder</ANALYSIS>"
    assert parse_experience(text).analysis == ""


def test_first_matching_span_wins():
    text = (
        "<analysis>first</analysis><analysis>second</analysis>"
        "<experience>• a</experience><experience>• b</experience>"
    )
    entry = parse_experience(text)
    assert entry.analysis == "first"
    assert entry.highlights == ("a",)


def test_bullet_markers_and_continuations():
    text = """<experience>
preamble line is ignored
• first tip
  spills onto a second line
- second tip
* third tip
</experience>"""
    entry = parse_experience(text)
    assert entry.highlights == (
        "first tip\n  spills onto a second line",
        "second tip",
        "third tip",
    )


def test_numbered_steps_tolerate_spacing():
    text = "<example>\n1. one\n 2 . two\n10. ten\n</example>"
    assert parse_experience(text).plan == ("one", "two", "ten")


def test_stray_opener_captures_to_first_closer():
    text = "<analysis>uses <experience> casually</analysis><experience>• real</experience>"
    entry = parse_experience(text)
    # First-match-wins is literal: the stray opener inside analysis starts the
    # experience span, which runs to the first closer, so the real bullet sits
    # mid-line and never registers.  Such text is simply an incomplete entry.
    assert entry.analysis.startswith("uses")
    assert entry.highlights == ()
    assert not check_completeness(entry).complete


def test_completeness_of_well_formed_entry():
    report = check_completeness(parse_experience(WELL_FORMED))
    assert report == SchemaReport(complete=True, missing_sections=(), empty_sections=())


def test_completeness_flags_missing_and_empty_sections():
    text = "<analysis></analysis><experience>• tip</experience>"
    report = check_completeness(parse_experience(text))
    assert not report.complete
    assert report.empty_sections == ("analysis",)
    assert report.missing_sections == ("example",)


def test_whitespace_only_section_counts_as_empty():
    text = "<analysis>  \n\t </analysis><experience>•  </experience><example>1.  </example>"
    report = check_completeness(parse_experience(text))
    assert not report.complete
    assert set(report.empty_sections) == {"analysis", "experience", "example"}


def test_plan_length_outside_advisory_range_warns_but_passes(caplog):
    entry = render_entry("a", ["b"], [f"step {i}" for i in range(9)])
    with caplog.at_level(logging.WARNING, logger="seamforge.schema"):
        report = check_completeness(entry)
    assert report.complete
    assert any("advisory" in rec.message for rec in caplog.records)


def test_plan_length_inside_advisory_range_is_quiet(caplog):
    entry = render_entry("a", ["b"], ["one", "two", "three"])
    with caplog.at_level(logging.WARNING, logger="seamforge.schema"):
        report = check_completeness(entry)
    assert report.complete
    assert not caplog.records


def test_render_entry_round_trips_through_parser():
    entry = render_entry(
        "look for structure",
        ["split the sum", "bound each part"],
        ["rewrite", "estimate", "combine"],
        token_count=7,
    )
    again = parse_experience(entry.raw_text, token_count=7)
    assert again == entry


def test_problem_instance_rejects_empty_statement():
    with pytest.raises(ValueError, match="empty statement"):
        ProblemInstance(id="x", statement="", target="1")


def test_entry_rejects_negative_token_count():
    with pytest.raises(ValueError, match="token_count"):
        ExperienceEntry(analysis="", highlights=(), plan=(), raw_text="", token_count=-1)


# -- template rendering -------------------------------------------------------


def test_seam_template_matches_golden_bytes():
    assert load_template(SEAM_TEMPLATE_ASSET) == (
        GOLDEN / "seam_prompt_template.txt"
    ).read_text(encoding="utf-8")


@pytest.mark.parametrize(
    "style,name",
    [
        (STYLE_THINK_ANSWER, "executor_think_answer_template.txt"),
        (STYLE_BOXED, "executor_boxed_template.txt"),
    ],
)
def test_executor_templates_match_golden_bytes(style, name):
    assert load_template(EXECUTOR_TEMPLATE_ASSETS[style]) == (
        GOLDEN / name
    ).read_text(encoding="utf-8")


def test_rendered_seam_prompt_matches_golden():
    instance = ProblemInstance(
        id="golden-1",
        statement="Compute the determinant of [[2, 1], [1, 2]].",
        target="3",
    )
    expected = (GOLDEN / "seam_prompt_rendered.txt").read_text(encoding="utf-8")
    assert render_seam_prompt(instance) == expected


@pytest.mark.parametrize(
    "style,name",
    [
        (STYLE_THINK_ANSWER, "executor_think_answer_rendered.txt"),
        (STYLE_BOXED, "executor_boxed_rendered.txt"),
    ],
)
def test_rendered_executor_prompt_matches_golden(style, name):
    instance = ProblemInstance(
        id="golden-1",
        statement="Compute the determinant of [[2, 1], [1, 2]].",
        target="3",
    )
    entry = render_entry(
        "The matrix is 2x2, so the determinant is ad - bc.",
        [
            "decompose the matrix product into scalar terms",
            "watch the sign of the cross term",
        ],
        ["write out ad and bc", "subtract", "report the number"],
    )
    expected = (GOLDEN / name).read_text(encoding="utf-8")
    assert render_executor_prompt(instance, entry, style) == expected


def test_substitution_touches_only_placeholder_sites():
    """Swapping the statement changes rendered bytes only where {problem} sat."""
    template = load_template(SEAM_TEMPLATE_ASSET)
    a = ProblemInstance(id="a", statement="SENTINEL-ALPHA", target="1")
    b = ProblemInstance(id="b", statement="SENTINEL-BETA", target="1")
    rendered_a = render_seam_prompt(a)
    rendered_b = render_seam_prompt(b)
    assert rendered_a == template.replace("{problem}", "SENTINEL-ALPHA")
    assert rendered_b == template.replace("{problem}", "SENTINEL-BETA")
    # Outside the substitution sites the two renders agree byte for byte.
    assert rendered_a.split("SENTINEL-ALPHA") == rendered_b.split("SENTINEL-BETA")


def test_executor_prompt_without_entry_blanks_the_advisory_block():
    instance = ProblemInstance(id="p", statement="Add 2 and 2.", target="4")
    template = load_template(EXECUTOR_TEMPLATE_ASSETS[STYLE_THINK_ANSWER])
    rendered = render_executor_prompt(instance, None, STYLE_THINK_ANSWER)
    assert rendered == template.replace("{problem}", "Add 2 and 2.").replace(
        "{experience}", ""
    )


def test_executor_prompt_unknown_style_is_config_error():
    instance = ProblemInstance(id="p", statement="s", target="t")
    with pytest.raises(ConfigError, match="prompt style"):
        render_executor_prompt(instance, None, "haiku")


def test_embedded_close_tag_substitutes_verbatim_with_warning(caplog):
    statement = "tricky </problem> embedded"
    instance = ProblemInstance(id="p", statement=statement, target="t")
    with caplog.at_level(logging.WARNING, logger="seamforge.schema"):
        rendered = render_seam_prompt(instance)
    assert statement in rendered
    assert any("verbatim" in rec.message for rec in caplog.records)
