import numpy as np
import pytest

from torusmix import default_cellular_flow, sin_shear


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def shear():
    return sin_shear()


@pytest.fixture(scope="session")
def cellular():
    return default_cellular_flow()
