import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from iterfe import (
    GridFunction, Identity, MirrorPower, PointSwap, Power, WeightedSystem, polynomial,
)

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

THIRD, TWO_THIRDS = 1 / 3, 2 / 3
FIXTURES = Path(__file__).parents[1] / "src" / "iterfe" / "fixtures"


def dyadic_system():
    return WeightedSystem((Power(2.0),), (1.0,))


def martingale_system():
    return WeightedSystem((Power(2.0), MirrorPower(2.0)), (0.5, 0.5))


def swap_system(weights=(0.5, 0.5)):
    return WeightedSystem.periodic(PointSwap(((THIRD, TWO_THIRDS),)), weights)


def swap_fn(at_third, at_two_thirds):
    return GridFunction((0.0, 0.0), overrides=((THIRD, at_third), (TWO_THIRDS, at_two_thirds)))


def dyadic_g():
    return polynomial(0.0, 1.0, -1.0)


@pytest.fixture
def dyadic():
    return dyadic_system()


@pytest.fixture
def martingale():
    return martingale_system()


@pytest.fixture
def swap():
    return swap_system()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
