import os
import sys

import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
FIXTURES = os.path.join(ROOT, "fixtures")
GOLDEN = os.path.join(HERE, "golden")
sys.path.insert(0, HERE)

from ragraph import parse_file, validate  # noqa: E402


def fixture_path(*parts):
    return os.path.join(FIXTURES, *parts)


def all_fixtures():
    return sorted(f for f in os.listdir(FIXTURES) if f.endswith(".rag"))


def clean_fixtures():
    return [f for f in all_fixtures() if f != "cycle.rag"]


@pytest.fixture(scope="session")
def breakfast():
    return validate(parse_file(fixture_path("english_breakfast.rag")))


@pytest.fixture(scope="session")
def sausage():
    return validate(parse_file(fixture_path("sausage.rag")))


@pytest.fixture(scope="session")
def shared_pan():
    return validate(parse_file(fixture_path("shared_pan.rag")))


# acceptance summary: one PASS/FAIL line per criterion

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    n = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
    if report.when == "call" or report.outcome != "passed":
        _ACCEPTANCE[n] = _ACCEPTANCE.get(n, "PASS") if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    from test_acceptance import CRITERIA
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status = _ACCEPTANCE.get(n, "NOT RUN")
        terminalreporter.write_line(f"criterion {n}: {status}  {CRITERIA[n]}")
