import numpy as np
import pytest

from medagg.data import standardize_columns, validate_dataset


def make_dataset(n=80, m=4, q=5, seed=0, coupling=0.4, noise=1.0):
    """Small generic dataset with mild exposure-mediator coupling."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    M = X @ rng.normal(size=(m, q)) * coupling + rng.normal(size=(n, q))
    Y = X @ rng.normal(size=m) * 0.4 + M @ rng.normal(size=q) * 0.4 \
        + rng.normal(scale=noise, size=n)
    return standardize_columns(validate_dataset(X, M, Y))


@pytest.fixture
def small_dataset():
    return make_dataset()


@pytest.fixture
def tiny_dataset():
    return make_dataset(n=50, m=2, q=2, seed=3)
