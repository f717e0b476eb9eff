import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def random_antisymmetric(n, rng, scale=1.0):
    a = rng.normal(size=(n, n)) * scale
    return a - a.T


def random_skew_complex(n, rng, scale=1.0):
    m = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * scale
    return m - m.T
