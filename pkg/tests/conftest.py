import pytest

from battcool.simulation import Plant
from battcool.vehicle import bundled_cycle


@pytest.fixture(scope="session")
def plant():
    return Plant()


@pytest.fixture(scope="session")
def cycles():
    return {name: bundled_cycle(name, repeat=1) for name in ("nycc", "sc03", "us06")}


ACCEPTANCE = []


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line per acceptance criterion; printed in the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
