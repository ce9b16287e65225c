import pytest

# (criterion, passed, detail) lines recorded by the acceptance tests
ACCEPTANCE = []


def record(criterion, passed, detail=""):
    line = f"{'PASS' if passed else 'FAIL'}: {criterion}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return passed


@pytest.fixture
def acceptance():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
