import pytest

from trojanguard.config import bundled
from trojanguard.library import read_cell_library
from trojanguard.netlist import read_netlist


@pytest.fixture(scope="session")
def lib():
    return read_cell_library(bundled("demo65.lib"))


@pytest.fixture(scope="session")
def fig3():
    return read_netlist(bundled("fig3.net"))


@pytest.fixture(scope="session")
def fig3_base():
    return read_netlist(bundled("fig3_base.net"))


@pytest.fixture(scope="session")
def const_and():
    return read_netlist(bundled("const_and.net"))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def verdict():
    def record(n: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[n])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
