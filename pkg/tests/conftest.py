import numpy as np
import pytest

from modeswitch.lander import EnvConfig
from modeswitch.policy import PolicyNet

FIXTURE_DIR = None  # set lazily by fixtures that need the shipped dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_policy(rng):
    """A deterministic small Mish policy for unit tests."""
    return PolicyNet.random(rng, 16, 16, "mish")


@pytest.fixture
def small_leaky_policy(rng):
    return PolicyNet.random(rng, 16, 16, "leaky_relu", alpha=0.01)


@pytest.fixture
def env_config():
    return EnvConfig()
