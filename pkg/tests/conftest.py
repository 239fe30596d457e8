import pytest

ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line: ``report(k, passed, detail)``."""
    def record(k, passed, detail):
        line = f"CRITERION {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[k] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
