import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def within_sigma(observed: float, expected: float, n: int, k: float = 4.0) -> bool:
    """|observed - expected| <= k standard errors of a Bernoulli(expected) mean."""
    sigma = math.sqrt(max(expected * (1 - expected), 1e-12) / n)
    return abs(observed - expected) <= k * sigma
