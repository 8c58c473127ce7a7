import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_contraction(rng, dim, norm=0.8):
    """Random dense matrix rescaled to the requested spectral norm."""
    m = rng.normal(size=(dim, dim))
    return m * (norm / np.linalg.norm(m, 2))
