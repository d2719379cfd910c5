import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bilateral_se.qnn.weights import ModelHyperparams, init_random  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lowb_hp():
    return ModelHyperparams.for_mode("lowb")


@pytest.fixture(scope="session")
def lowb_weights(lowb_hp):
    return init_random(lowb_hp, seed=7, mode="lowb")
