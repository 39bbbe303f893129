import numpy as np
import pytest


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def low_rank(rng, m: int, n: int, r: int) -> np.ndarray:
    return rng.standard_normal((m, r)) @ rng.standard_normal((n, r)).T


@pytest.fixture
def rng():
    return philox(20240817)
