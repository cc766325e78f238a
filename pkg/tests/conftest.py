import pytest

_VERDICTS = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; it is echoed now and again in the run summary."""
    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
