import pytest

_LINES: list[str] = []


def format_line(cid: str, ok: bool, detail: str) -> str:
    return f"[C{cid}] {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.fixture(scope="session")
def report():
    def add(cid, ok, detail):
        line = format_line(cid, ok, detail)
        _LINES.append(line)
        print(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
