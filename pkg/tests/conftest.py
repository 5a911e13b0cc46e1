import numpy as np
import pytest

from plab.models import Grid
from plab.services.spectral_core import build_partition


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def grid32():
    return Grid(32)


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def pu():
    return build_partition()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
