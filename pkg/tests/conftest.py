"""Collect acceptance outcomes and print one verdict line per criterion."""

import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _outcomes.setdefault(number, {"title": title, "results": []})
        entry["results"].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        ok = all(o == "passed" for _, o in entry["results"])
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {entry['title']}")
        if not ok:
            for name, o in entry["results"]:
                terminalreporter.write_line(f"    {name}: {o}")
