import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fris.channel import assemble, sample_realization
from fris.config import ScenarioConfig

settings.register_profile(
    "fris", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("fris")


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    return ScenarioConfig(M_y=2, M_z=2, N_t=2, K=2, I=9, L_bounds=(1, 3), Z_bounds=(1, 3))


@pytest.fixture
def small_assembled(small_config):
    r = sample_realization(small_config, 7)
    return assemble(r, small_config.I, small_config.noise).noise_normalized()
