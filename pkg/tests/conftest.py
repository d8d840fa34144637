import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pointacoustics.core import Medium, OscillatorArray

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_medium():
    return Medium(1.0, 1.0, 1.0)


@pytest.fixture
def three_walls():
    return OscillatorArray((-1.0, 0.0, 1.5), (1.0, 2.0, 0.5), (1.0, 3.0, 2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
