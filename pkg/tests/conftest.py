import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record a one-line PASS/FAIL verdict; printed in the terminal summary."""

    def record(number, name, ok, detail=""):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        _ACCEPTANCE.append(f"[{verdict}] criterion {number}: {name}" + (f"  ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
