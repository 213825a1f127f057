"""
Experience entries and prompt rendering
=======================================

The guidance policy emits one *experience entry* per problem: a short
tagged document with an analysis paragraph, bulleted experience
highlights, and a numbered reference plan.  This demo parses a few
entries, checks their structural completeness, and renders the prompts
that carry them to the policy and to the frozen executor.
"""

from seamforge import (
    ProblemInstance,
    check_completeness,
    parse_experience,
    render_entry,
    render_executor_prompt,
    render_seam_prompt,
)

# ---------------------------------------------------------------------------
# Parsing is total: any text yields an entry, well-formed or not.

text = """\
<analysis>The puzzle reduces to one multiplication once the pairs cancel.</analysis>
<experience>
- decompose the product into scalar factors
- cancel matching numerator/denominator pairs early
</experience>
<example>
1. list the factors
2. cancel pairs
3. multiply what remains
</example>
"""

entry = parse_experience(text)
print("analysis:  ", entry.analysis)
print("highlights:", entry.highlights)
print("plan:      ", entry.plan)

report = check_completeness(entry)
print("complete:", report.complete)

# A missing or empty section is not an error -- it just fails the
# completeness check that the binary reward requires.
partial = parse_experience("<analysis>half-formed thought</analysis>")
report = check_completeness(partial)
print("partial entry complete:", report.complete, "| missing:", report.missing_sections)

# ---------------------------------------------------------------------------
# render_entry is the inverse of parsing: structured fields back to an
# entry whose raw text parses to the same fields.

rebuilt = render_entry(entry.analysis, entry.highlights, entry.plan)
assert parse_experience(rebuilt.raw_text).highlights == entry.highlights
print("\nround trip preserved", len(entry.highlights), "highlights")

# ---------------------------------------------------------------------------
# Two prompt surfaces: the guidance policy sees the bare problem; the
# executor sees the problem plus the rendered entry, in one of two
# dialogue styles.

instance = ProblemInstance(
    id="demo-1",
    statement="Compute the determinant of [[2, 1], [1, 2]].",
    target="3",
)

print("\n--- guidance prompt " + "-" * 40)
print(render_seam_prompt(instance))

print("--- executor prompt (think/answer style) " + "-" * 19)
print(render_executor_prompt(instance, entry, "think-answer-tags"))
