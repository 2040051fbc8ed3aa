import pytest

# One line per acceptance criterion, appended by tests/test_acceptance.py and
# echoed after the test summary so the verdicts survive output capture.
CRITERION_LINES = []


@pytest.fixture(scope="session")
def criterion_log():
    return CRITERION_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
