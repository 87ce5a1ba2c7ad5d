import pytest

_outcomes = {}
_lines = []


def pytest_collection_modifyitems(items):
    # acceptance checks run last so they can see the property-suite outcomes
    items.sort(key=lambda it: "test_acceptance" in it.nodeid)


def pytest_runtest_logreport(report):
    if report.when == "call" or report.failed:
        _outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in _lines:
            terminalreporter.write_line(line)


@pytest.fixture
def outcomes():
    return _outcomes


@pytest.fixture
def criterion_log():
    return _lines
