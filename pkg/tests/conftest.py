import pytest

# criterion name -> passed so far; several tests may share one criterion
_results: dict[str, bool] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    failed = report.failed
    if report.when == "call" or (failed and report.when == "setup"):
        name = marker.args[0]
        _results[name] = _results.get(name, True) and not (failed or report.skipped)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in _results.items():
        terminalreporter.write_line(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}  {name}")
