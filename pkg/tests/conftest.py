import numpy as np
import pytest

from graphcnn.graph import Graph, erdos_renyi, make_rng


def random_graph(rng: np.random.Generator, n: int, directed: bool = False, p: float = 0.3,
                 weighted: bool = True) -> Graph:
    """Random simple graph with optional self-loops and positive weights."""
    mask = rng.random((n, n)) < p
    if not directed:
        mask = np.triu(mask)
    src, dst = np.nonzero(mask)
    w = rng.uniform(0.5, 2.0, len(src)) if weighted else np.ones(len(src))
    return Graph.from_edges(n, list(zip(src, dst, w)), directed=directed)


@pytest.fixture
def rng():
    return make_rng(1234)


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def er20():
    return erdos_renyi(20, 0.25, seed=5)
