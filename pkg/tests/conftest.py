import pytest

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if report.when == "call" or report.failed:
        state = "PASS" if report.passed else "FAIL"
        prev = _criteria.get(number)
        if prev is None or prev[1] == "PASS":
            _criteria[number] = (title, state)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, state = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {state}: {title}")
