import numpy as np

from app.errors import UnknownModel
from app.numerics import RandomStream
from app.schemas.scenario import ChannelModel, ScenarioConfig


def rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian entries with unit power."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def smallscale_sample(model, M: int, K: int, params: ScenarioConfig, stream: RandomStream) -> np.ndarray:
    """
    K x M small-scale fading matrix.
    Rician: unit total power, linear K-factor, fixed LOS component 1+0j.
    Nakagami: amplitude with shape m and spread Omega, independent uniform phase.
    """
    try:
        model = ChannelModel(model)
    except ValueError as exc:
        raise UnknownModel(f"unknown fading model {model!r}") from exc
    rng = stream.generator()
    shape = (K, M)
    if model == ChannelModel.RAYLEIGH:
        return rayleigh(rng, shape)
    if model == ChannelModel.RICIAN:
        kf = params.rician_factor
        return np.sqrt(kf / (kf + 1.0)) + np.sqrt(1.0 / (kf + 1.0)) * rayleigh(rng, shape)
    if model == ChannelModel.NAKAGAMI:
        m, omega = params.nakagami_m, params.nakagami_omega
        power = rng.gamma(shape=m, scale=omega / m, size=shape)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        return np.sqrt(power) * np.exp(1j * phase)
    raise UnknownModel(f"{model.value} is not a small-scale fading model")
