import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Record one verdict line per acceptance criterion."""

    def emit(line: str) -> None:
        request.config.stash.setdefault(_LINES, []).append(line)
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
