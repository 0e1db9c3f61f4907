import pytest

from brqw.graph import Graph

# Two length-6 paths on Z^2 with equal phase content and opposite Hadamard
# signs: a1 a2 a2^-1 a1 a1^-1 a2 and a1 a1 a1^-1 a2 a2^-1 a2 (letters 0..3 =
# a1, a2, a1^-1, a2^-1).  Their class amplitude is exactly zero.
CANCELLING_PAIR = ((0, 1, 3, 0, 2, 1), (0, 0, 2, 1, 3, 1))


@pytest.fixture
def z2():
    return Graph.lattice(2)


@pytest.fixture
def t4():
    return Graph.tree(2)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    lines = test_acceptance.report_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
