import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        line = f"criterion {number:>2} {title}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
