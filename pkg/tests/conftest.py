import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bethe_circuit.cba_core import MagnonSystem

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_momenta(rng, M, spread=0.3):
    return rng.uniform(-np.pi, np.pi, M) + 1j * rng.uniform(-spread, spread, M)


def random_system(rng, N, M, delta=0.5, spread=0.3):
    return MagnonSystem.from_momenta(N, random_momenta(rng, M, spread), delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
