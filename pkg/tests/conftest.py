import pytest

from stokesmpe.assembly import Discretization, ParameterSet
from stokesmpe.mesh import build_two_square_mesh


@pytest.fixture(scope="session")
def unit_params():
    return ParameterSet.unit()


@pytest.fixture(scope="session")
def disc2(unit_params):
    return Discretization(build_two_square_mesh(2), unit_params)


@pytest.fixture(scope="session")
def disc1(unit_params):
    return Discretization(build_two_square_mesh(1), unit_params)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line; printed in the terminal summary."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
