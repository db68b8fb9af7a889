import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from annealab import SampleSet, quadratic_data, ripple, smoothed_double_well


@pytest.fixture
def quad_model():
    return quadratic_data(1)


@pytest.fixture
def ripple_model():
    return ripple(1)


@pytest.fixture
def dw_model():
    return smoothed_double_well()


@pytest.fixture
def origin_sample():
    return SampleSet(points=np.array([[0.0]]), distribution="uniform-ball",
                     zmax=1.0)


@pytest.fixture
def small_sample(quad_model):
    return quad_model.draw_sample(8, seed=7)
