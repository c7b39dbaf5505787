import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_spd(rng, n):
    M = rng.standard_normal((n, n))
    return M.T @ M + np.eye(n)
