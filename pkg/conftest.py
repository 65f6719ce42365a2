import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from koopman.dynamics.simulate import SamplingPlan, generate_snapshots  # noqa: E402
from koopman.dynamics.systems import cubic1d  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def cubic_plan():
    return SamplingPlan(count=20, low=(0.0,), high=(0.95,), dt=0.5, seed=7)


@pytest.fixture
def cubic_snapshots(cubic_plan):
    return generate_snapshots(cubic1d(), cubic_plan)
