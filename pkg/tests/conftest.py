import pytest

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords or report.when != "call" and not report.failed:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or name not in _ACCEPTANCE:
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: (int(n.split("_")[2]), n)):
        terminalreporter.write_line(f"{_ACCEPTANCE[name]}  {name}")


@pytest.fixture
def timer():
    import time

    class _Timer:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.t0

    return _Timer
