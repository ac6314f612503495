import numpy as np
import pytest

from mtlasso.model import MvmrProblem


def make_problem(seed, K=2, n=40, p=10, support=(0, 3), scale=1.0, sigma=0.2):
    """Small seeded instance with a known planted coefficient matrix."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((K, n, p))
    B = np.zeros((p, K))
    for i, j in enumerate(support):
        B[j, :] = scale * ((-1.0) ** i) * (1.0 + 0.1 * np.arange(K))
    Y = np.einsum("knp,pk->kn", X, B) + sigma * rng.standard_normal((K, n))
    return MvmrProblem(designs=X, responses=Y), B


@pytest.fixture
def small_problem():
    return make_problem(7)
