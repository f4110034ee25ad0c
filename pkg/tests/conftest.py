import numpy as np
import pytest

from hypgreen.builders import integer_line, random_graph, regular_tree


@pytest.fixture(scope="session")
def tree6():
    return regular_tree(3, 6)


@pytest.fixture(scope="session")
def tree8():
    return regular_tree(3, 8)


@pytest.fixture(scope="session")
def line60():
    return integer_line(60)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(n, seed, p=0.15):
    """Connected random graph with positive potential, for coercive tests."""
    g = random_graph(n, p, seed=seed)
    V = np.random.default_rng(seed).uniform(0.05, 0.5, g.n)
    return g, V


def descend(t, v, k, choice=0):
    """Walk ``k`` levels down from ``v``, taking child ``choice`` each time."""
    from hypgreen.builders import tree_children

    for _ in range(k):
        kids = tree_children(t, v)
        v = kids[choice % len(kids)]
    return int(v)


@pytest.fixture(scope="session")
def tree12():
    return regular_tree(3, 12)
