import pytest

_CRITERION_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion_report():
    """Collect one pass/fail line per acceptance criterion for the final
    terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        verdict = "PASS" if passed else "FAIL"
        _CRITERION_LINES[number] = f"criterion {number:2d} {verdict}  {detail}"
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERION_LINES):
        terminalreporter.write_line(_CRITERION_LINES[number])
