import pytest

_REPORT: list[str] = []


def pytest_addoption(parser):
    parser.addoption(
        "--bench", action="store_true", default=False,
        help="recompute optimizer benchmarks from scratch instead of "
             "re-evaluating the stored artifacts under runs/ (hours)",
    )


@pytest.fixture(scope="session")
def bench_mode(request):
    return request.config.getoption("--bench")


@pytest.fixture(scope="session")
def report():
    """Collector for the per-requirement verdict lines."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance summary")
        for line in _REPORT:
            terminalreporter.write_line(line)
