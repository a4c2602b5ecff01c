import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion, then assert it."""
    store = request.config.stash.setdefault(_RESULTS, {})

    def record(number: int, title: str, checks: dict):
        ok = all(bool(v[0]) for v in checks.values())
        detail = "; ".join(f"{k}: {'ok' if v[0] else 'FAIL'} ({v[1]})" for k, v in checks.items())
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
        store[number] = line
        print(line)
        failed = [k for k, v in checks.items() if not v[0]]
        assert not failed, f"criterion {number} failed: {failed}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_RESULTS, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        terminalreporter.write_line(store[n])
