import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coarsekit.dirac import DiracParams, OddEvenOperator
from coarsekit.lattice import generate_gauge

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg2():
    return generate_gauge((2, 2, 2, 2), 5, 0.4)


@pytest.fixture(scope="session")
def cfg4():
    return generate_gauge((4, 4, 4, 4), 11, 0.3)


@pytest.fixture(scope="session")
def oe4(cfg4):
    return OddEvenOperator(DiracParams(-0.2, 1.0), cfg4)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
