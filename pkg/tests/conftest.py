import numpy as np
import pytest

from pspin import model
from pspin.rng import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture(scope="session")
def tensor_p3_n6():
    return model.sample_disorder(model.ModelSpec(3, 6, 1.0), 42)


@pytest.fixture(scope="session")
def tensor_p4_n5():
    return model.sample_disorder(model.ModelSpec(4, 5, 1.0), 42)


@pytest.fixture(scope="session")
def tensor_p3_n2():
    return model.sample_disorder(model.ModelSpec(3, 2, 0.0), 7)


def random_sphere_point(n, seed=0):
    g = make_rng(seed).standard_normal(n)
    return g * np.sqrt(n) / np.linalg.norm(g)
