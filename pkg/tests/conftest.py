import numpy as np
import pytest

from gvc.icio import IcioTable


def make_open2():
    # 2 countries x 1 sector, x = [100, 100]
    return IcioTable(
        year=2011,
        countries=("A", "B"),
        sectors=("S",),
        Z=[[20.0, 10.0], [15.0, 30.0]],
        F=[[60.0, 10.0], [5.0, 50.0]],
        va=[65.0, 60.0],
        x=[100.0, 100.0],
    )


def make_closed2():
    # 1 country x 2 sectors, final demand [50, 50]
    return IcioTable(
        year=2011,
        countries=("H",),
        sectors=("S1", "S2"),
        Z=[[20.0, 30.0], [10.0, 40.0]],
        F=[[50.0], [50.0]],
        va=[70.0, 30.0],
        x=[100.0, 100.0],
    )


def make_no_linkage(M=2, N=2):
    n = M * N
    rng = np.random.default_rng(3)
    F = rng.uniform(1, 10, (n, M))
    x = F.sum(axis=1)
    return IcioTable(2000, [f"C{i}" for i in range(M)], [f"S{j}" for j in range(N)],
                     np.zeros((n, n)), F, x, x)


@pytest.fixture
def open2():
    return make_open2()


@pytest.fixture
def closed2():
    return make_closed2()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
