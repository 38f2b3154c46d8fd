import pytest

# filled by the acceptance tests, echoed at the end of the run
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    def record(number, ok, detail, seconds):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.1f} s)"
        ACCEPTANCE[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
