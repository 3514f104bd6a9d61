import pytest

_LINES = []


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line for an acceptance criterion; returns the verdict."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>4} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
