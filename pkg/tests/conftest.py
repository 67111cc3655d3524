import pytest

_LINES_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Recorder for acceptance verdicts: ``acceptance(n, ok, detail)``."""
    lines = request.config.stash.setdefault(_LINES_KEY, {})

    def record(n, ok, detail):
        lines[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[n], flush=True)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
