import pytest

_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion."""
    book = request.config.stash.setdefault(_KEY, {})

    def record(name: str, ok: bool, detail: str) -> bool:
        book[name] = (ok, detail)
        print(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    book = config.stash.get(_KEY, {})
    if not book:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(book, key=lambda k: int(k[1:])):
        ok, detail = book[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
