import numpy as np
import pytest

from squintsim import CircuitParams


@pytest.fixture
def params() -> CircuitParams:
    return CircuitParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(987654321)
