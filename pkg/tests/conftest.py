import pytest

VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def report(number: int, name: str, ok: bool, detail: str, seconds: float):
        line = f"{'PASS' if ok else 'FAIL'} {number}: {name} | {detail} | {seconds:.1f}s"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return report
