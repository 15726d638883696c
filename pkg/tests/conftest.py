import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def unit():
    from kernelnoise import GridMeasure, GroundSpace

    space = GroundSpace.interval(0.0, 1.0, 1000)
    return space, GridMeasure.lebesgue(space)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
