import numpy as np
import pytest

from irslink.channel import CorrelationProfile

TABLE_LAMBDAS1 = (0.95, 0.9, 0.9, 0.85)
TABLE_LAMBDAS2 = (0.9, 0.95, 0.85, 0.9)


@pytest.fixture
def table_profiles():
    return CorrelationProfile.uniform(TABLE_LAMBDAS1), CorrelationProfile.uniform(TABLE_LAMBDAS2)


@pytest.fixture
def independent_profiles():
    zero = CorrelationProfile.uniform([0.0] * 4)
    return zero, zero


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
