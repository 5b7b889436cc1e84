import numpy as np
import pytest

from helpers import alpha_field
from ReservoirTopology.schemas import VariogramKind, VariogramModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def exp_model():
    return VariogramModel(kind=VariogramKind.EXPONENTIAL, range_m=2.0)


@pytest.fixture
def gauss_model():
    return VariogramModel(kind=VariogramKind.GAUSSIAN, range_m=3.0)


@pytest.fixture
def hollow_shell_field():
    """3x3x3 shell of cells at 0.3 around a centre cell at 0.8."""
    values = np.full((3, 3, 3), 0.3)
    values[1, 1, 1] = 0.8
    return alpha_field(values)
