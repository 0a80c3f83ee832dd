import numpy as np
import pytest

from mslik.verify import random_problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def problem(rng):
    """Factory for random (model, theta, x) triples."""

    def make(model_name, n):
        return random_problem(model_name, n, rng)

    return make
