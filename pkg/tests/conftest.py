import numpy as np
import pytest

from mirrorprox import MirrorMap, ProductSimplex, VIProblem, generate_game, matching_pennies

X22 = ProductSimplex((2, 2))


@pytest.fixture
def square():
    return X22


@pytest.fixture(scope="session")
def game42():
    return generate_game(42, (0.0, 100.0))


@pytest.fixture
def pennies():
    return matching_pennies().to_problem()


@pytest.fixture
def zero_problem():
    return VIProblem(X22, np.zeros((4, 4)), np.zeros(4))


@pytest.fixture(params=["entropic", "euclidean"])
def mirror(request):
    return MirrorMap(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_point(rng, blocks=(2, 2)):
    return np.concatenate([rng.dirichlet(np.ones(n)) for n in blocks])
