import numpy as np
import pytest

from treeshift import AdjacencyModel, chain_from_matrices, reciprocal_on_support

NINE_ADJACENCY = [
    [0, 0, 0, 0, 1, 1, 0, 0, 0],
    [0, 0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 0, 0, 0, 0, 0, 1, 0, 0],
    [0, 1, 1, 0, 0, 0, 0, 0, 0],
    [1, 0, 1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0, 0],
]


def make_model(adjacency, d=2):
    n = len(adjacency)
    return AdjacencyModel(tuple(str(i) for i in range(n)), adjacency, d)


@pytest.fixture(scope="session")
def full2():
    return make_model([[1, 1], [1, 1]])


@pytest.fixture(scope="session")
def full3():
    return make_model([[1, 1, 1]] * 3)


@pytest.fixture(scope="session")
def golden():
    return make_model([[1, 1], [1, 0]])


@pytest.fixture(scope="session")
def swap2():
    return make_model([[0, 1], [1, 0]])


@pytest.fixture(scope="session")
def period2():
    return make_model([[0, 1, 1], [1, 0, 0], [1, 0, 0]])


@pytest.fixture(scope="session")
def nine():
    return make_model(NINE_ADJACENCY, d=3)


@pytest.fixture(scope="session")
def example1():
    """Primitive 2-symbol chain with one weighted edge (weight 2)."""
    m = [[0.5, 1.0], [0.5, 0.0]]
    w = [[1.0, 2.0], [1.0, 0.0]]
    return chain_from_matrices(m, w, d=2)


@pytest.fixture(scope="session")
def example2():
    """Irreducible period-2 chain with distinct phase limits."""
    m = np.array([[0, 1, 1], [1 / 3, 0, 0], [2 / 3, 0, 0]])
    return chain_from_matrices(m, m, d=2)


@pytest.fixture(scope="session")
def extreme():
    """Period-2 chain whose sample means alternate between two constants (W = M)."""
    m = np.array([[0.0, 1.0, 1.0], [0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
    return chain_from_matrices(m, m, d=2)


@pytest.fixture(scope="session")
def extreme_recip():
    """Same chain observed through the likelihood-decay weights W = 1/M."""
    m = np.array([[0.0, 1.0, 1.0], [0.5, 0.0, 0.0], [0.5, 0.0, 0.0]])
    return chain_from_matrices(m, reciprocal_on_support(m), d=2)


def random_a0_matrix(rng, n, density=0.55):
    """Random 0/1 matrix with every column sum positive."""
    while True:
        adj = (rng.random((n, n)) < density).astype(int)
        if (adj.sum(axis=0) > 0).all():
            return adj
