"""Shared fixtures plus the acceptance-criteria result banner.

Tests in test_acceptance.py carry an ``acceptance(n, title)`` marker; after
the session the terminal summary prints one PASS/FAIL line per criterion so
the gate can be read at a glance.
"""

from __future__ import annotations

import numpy as np
import pytest

from seamforge import toybench

_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(n, title): tie a test to one numbered acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report._acceptance = (marker.args[0], marker.args[1])


def pytest_runtest_logreport(report):
    info = getattr(report, "_acceptance", None)
    if info is None:
        return
    n, title = info
    if report.when == "call":
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    elif report.when == "setup" and (report.skipped or report.failed):
        outcome = "SKIP" if report.skipped else "FAIL"
    else:
        return
    # A criterion may be covered by several tests: FAIL beats PASS beats SKIP.
    rank = {"FAIL": 2, "PASS": 1, "SKIP": 0}
    prior = _RESULTS.get(n)
    if prior is None or rank[outcome] > rank[prior[1]]:
        _RESULTS[n] = (title, outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_RESULTS):
        title, outcome = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {outcome}  {title}")


# -- shared fixtures ----------------------------------------------------------


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture
def toy_policy():
    return toybench.toy_policy(seed=3)


@pytest.fixture
def toy_instances():
    return toybench.toy_dataset(8)


@pytest.fixture
def toy_executor():
    return toybench.toy_executor()
