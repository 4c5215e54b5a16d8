import numpy as np
import pytest

from cliquemat.graph import AdjacencyMatrix, CliqueMatrix

# two triangles {0,1,2} and {1,2,3} sharing the edge 1-2
TWO_TRIANGLES_EDGES = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]


@pytest.fixture
def two_triangles():
    return AdjacencyMatrix.from_edges(4, TWO_TRIANGLES_EDGES)


@pytest.fixture
def two_triangles_z():
    return CliqueMatrix.from_columns(4, [(0, 1, 2), (1, 2, 3)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
