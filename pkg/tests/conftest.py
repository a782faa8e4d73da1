import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from levy_isamp import VarianceGammaModel

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BASKET_SIGMA = [[0.04, 0.02, 0.02], [0.02, 0.04, 0.02], [0.02, 0.02, 0.04]]


@pytest.fixture(scope="session")
def vg1():
    return VarianceGammaModel(1.0, [-0.2], [[0.04]])


@pytest.fixture(scope="session")
def vg3():
    return VarianceGammaModel(1.0, [-0.2, -0.2, -0.2], BASKET_SIGMA)


def finite_diff(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out
