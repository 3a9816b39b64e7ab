from __future__ import annotations

import sys
from pathlib import Path

import pytest

from stpasec.corpus import corpus_path, corpus_source, load_corpus

sys.path.insert(0, str(Path(__file__).parent))


# criterion number -> (title, outcomes of its tests)
_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _CRITERIA.setdefault(number, (title, []))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = next((m for m in getattr(report, "_criterion", ()) if m), None)
    if marker is None:
        return
    number, title = marker
    _CRITERIA.setdefault(number, (title, []))[1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    outcome.get_result()._criterion = (tuple(marker.args),) if marker else ()


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"AC{number} {status}: {title} ({len(outcomes)} check(s))")


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def corpus_text() -> str:
    return corpus_source()


@pytest.fixture(scope="session")
def corpus_file() -> Path:
    return corpus_path()

