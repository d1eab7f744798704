import pytest

from eqaoa.graph import RegularGraph

from reference import K4_EDGES, K33_EDGES, PETERSEN_EDGES


@pytest.fixture
def k4() -> RegularGraph:
    return RegularGraph(n=4, degree=3, edges=K4_EDGES, seed=0)


@pytest.fixture
def k33() -> RegularGraph:
    return RegularGraph(n=6, degree=3, edges=K33_EDGES, seed=0)


@pytest.fixture
def petersen() -> RegularGraph:
    return RegularGraph(n=10, degree=3, edges=PETERSEN_EDGES, seed=0)


@pytest.fixture
def path2() -> RegularGraph:
    # single edge on two nodes: the smallest sanity fixture for the simulator
    return RegularGraph(n=2, degree=1, edges=((0, 1),), seed=0)
