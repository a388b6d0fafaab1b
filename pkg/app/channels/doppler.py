import numpy as np

from app.numerics import RandomStream

SPEED_OF_LIGHT = 3e8
NUM_SINUSOIDS = 64


def doppler_hz(velocity: float, carrier_frequency_hz: float) -> float:
    return velocity * carrier_frequency_hz / SPEED_OF_LIGHT


def clarke_fading(velocity: float, carrier_frequency_hz: float, slot_times, M: int, K: int,
                  stream: RandomStream, num_sinusoids: int = NUM_SINUSOIDS) -> np.ndarray:
    """
    Time-correlated Rayleigh fading by sum of sinusoids, shape (T, K, M).
    The process is fixed by `stream`, so calling again with later times continues the same realisation.
    Autocorrelation approaches J0(2*pi*f_d*tau).
    """
    times = np.asarray(slot_times, dtype=np.float64).reshape(-1)
    rng = stream.generator()
    n = np.arange(num_sinusoids)
    theta0 = rng.uniform(-np.pi, np.pi, size=(K, M, 1))
    alpha = (2.0 * np.pi * n + theta0) / num_sinusoids
    phi_re = rng.uniform(0.0, 2.0 * np.pi, size=(K, M, num_sinusoids))
    phi_im = rng.uniform(0.0, 2.0 * np.pi, size=(K, M, num_sinusoids))
    w = 2.0 * np.pi * doppler_hz(velocity, carrier_frequency_hz) * np.cos(alpha)

    arg = w[None, ...] * times[:, None, None, None]
    re = np.cos(arg + phi_re[None, ...]).sum(axis=-1)
    im = np.cos(arg + phi_im[None, ...]).sum(axis=-1)
    return (re + 1j * im) / np.sqrt(num_sinusoids)
