"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

from collections import defaultdict

import pytest

CRITERIA = {
    1: "worked part-set fixtures",
    2: "prior equals brute-force recount",
    3: "reward algebra",
    4: "gradient vs finite differences",
    5: "sampler fidelity",
    6: "reduction equivalences",
    7: "offline self-sufficiency",
    8: "desk-scale method ordering",
    9: "generator flip training",
}

_outcomes: dict[int, list[str]] = defaultdict(list)
_notes: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number this test checks")


def pytest_runtest_logreport(report):
    number = getattr(report, "criterion", None)
    if number is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes[number].append(report.outcome)
        for key, value in report.user_properties:
            if key == "note":
                _notes[number].append(str(value))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        results = _outcomes.get(number)
        if not results:
            continue
        if all(r == "passed" for r in results):
            verdict = "PASS"
        elif any(r == "failed" for r in results):
            verdict = "FAIL"
        else:
            verdict = "SKIP"
        line = f"criterion {number}: {verdict} - {title} ({len(results)} checks)"
        if _notes.get(number):
            line += " | " + "; ".join(_notes[number])
        terminalreporter.write_line(line)


@pytest.fixture
def note(record_property):
    """Attach a short measured value to the acceptance summary line."""
    return lambda text: record_property("note", text)
