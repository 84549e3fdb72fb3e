"""Collect results of tests marked ``criterion`` and print one line per criterion."""

from __future__ import annotations

_results: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "passed": True, "ran": False})
    # a failure in setup, call or teardown fails the criterion
    if call.excinfo is not None and not call.excinfo.errisinstance(_skip_types()):
        entry["passed"] = False
    if call.when == "call":
        entry["ran"] = True


def _skip_types():
    import pytest

    return (pytest.skip.Exception,)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        r = _results[number]
        verdict = "PASS" if r["passed"] and r["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {r['title']}")
