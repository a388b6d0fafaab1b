import os

# Settings are read once at import time.
os.environ.setdefault("SHOW_PROGRESS", "false")
os.environ.setdefault("RECORD_TIMINGS", "false")
os.environ.setdefault("WORKERS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
import torch  # noqa: E402

from app.channels.models import ChannelInstance  # noqa: E402
from app.numerics import RandomStream  # noqa: E402
from app.schemas.scenario import ChannelModel, ScenarioConfig  # noqa: E402

torch.use_deterministic_algorithms(True)
torch.set_num_threads(1)


def random_instance(seed: int, M: int, K: int, power: float = 10.0, sigma2=None) -> ChannelInstance:
    rng = np.random.default_rng(seed)
    H = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2.0)
    sigma2 = np.ones(K) if sigma2 is None else np.asarray(sigma2, dtype=np.float64)
    return ChannelInstance(H=H, sigma2=sigma2, power=power)


@pytest.fixture
def stream() -> RandomStream:
    return RandomStream(1234)


@pytest.fixture
def rayleigh_config() -> ScenarioConfig:
    return ScenarioConfig(channel_model=ChannelModel.RAYLEIGH, num_antennas=4, num_users=4, power_dbm=25.0,
                          noise_power_dbm=0.0)


@pytest.fixture
def small_config() -> ScenarioConfig:
    """M = K = 2 keeps network and solver tests fast."""
    return ScenarioConfig(channel_model=ChannelModel.RAYLEIGH, num_antennas=2, num_users=2, power_dbm=10.0,
                          noise_power_dbm=0.0)
