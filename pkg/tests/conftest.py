import pytest

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion.

    Each line is printed immediately (visible with ``-s``) and again in the
    terminal summary, so a plain ``pytest -v`` run shows all of them.
    """
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: str, title: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:>2}  {title}: {detail}"
        print(line)
        lines.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda t: int(t[0].rstrip("ab"))):
        terminalreporter.write_line(line)
