import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kdvb_delay.grid import Grid

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid():
    return Grid(np.pi, 64)


@pytest.fixture
def wide_grid():
    return Grid(24.0, 256)
