import pytest

# criterion verdicts, printed together at the end of the run
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}"
        VERDICTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
