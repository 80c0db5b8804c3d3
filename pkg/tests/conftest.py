import numpy as np
import pytest

from levyst.data import SpaceTimeDataset, standardize
from levyst.model import PriorConfig


@pytest.fixture
def tiny_dataset():
    """4 locations x 6 unit-gap times, p=2, standardized."""
    rng = np.random.default_rng(123)
    locs = rng.random((4, 2))
    times = np.arange(1.0, 7.0)
    y = rng.standard_normal((4, 6))
    data, _ = standardize(SpaceTimeDataset(locs, times, y))
    return data


@pytest.fixture
def tame_prior():
    """Informative priors keeping truncation rejections rare in tests."""
    return PriorConfig(ig_a=3.0, ig_b=2.0, ig_a_tight=3.0, ig_b_tight=2.0,
                       lambda_a=6.0, lambda_b=2.0, nu_var=1.0, rho_var=1.0)
