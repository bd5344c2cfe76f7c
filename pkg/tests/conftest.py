import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jordanflow import TolerancePolicy


@pytest.fixture
def pol():
    return TolerancePolicy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240911)
