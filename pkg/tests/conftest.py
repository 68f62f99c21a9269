import pytest

_GATE = pytest.StashKey[list]()


@pytest.fixture
def gate(request):
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""
    lines = request.config.stash.setdefault(_GATE, [])

    def record(criterion, ok, detail, status=None):
        line = f"{status or ('PASS' if ok else 'FAIL')}  {criterion}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_GATE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
