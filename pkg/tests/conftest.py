import pytest

_REPORT = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_REPORT, key=lambda s: int(s.split()[0][1:])):
        terminalreporter.write_line(line)
