"""Shared fixtures; acceptance results are echoed in the terminal summary."""

import pytest

from mdpart.gapseq import Constant, GapSequence, Periodic

_ACCEPTANCE = []


@pytest.fixture
def record():
    """``record(label, passed, detail)`` prints and stores one acceptance line."""
    def _record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
        print(line)
        _ACCEPTANCE.append(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def plain():
    return GapSequence(Constant(0))


@pytest.fixture(scope="session")
def strict():
    return GapSequence(Constant(1))


@pytest.fixture(scope="session")
def gap2():
    return GapSequence(Constant(2))


@pytest.fixture(scope="session")
def alt():
    return GapSequence(Periodic((1, 0)))


@pytest.fixture(scope="session")
def four_specs(plain, strict, gap2, alt):
    return {"const:0": plain, "const:1": strict, "const:2": gap2, "periodic:1,0": alt}
