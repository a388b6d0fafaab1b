import numpy as np

from app.channels.models import ChannelInstance
from app.errors import DegenerateInstance, DimensionMismatch
from app.numerics import hermitian_solve


def _check_beams(instance: ChannelInstance, W) -> np.ndarray:
    W = np.asarray(W, dtype=np.complex128)
    if W.shape != (instance.num_antennas, instance.num_users):
        raise DimensionMismatch(
            f"beamformers must be {instance.num_antennas}x{instance.num_users}, got {W.shape}"
        )
    if not np.all(np.isfinite(W)):
        raise ValueError("beamformers have non-finite entries")
    return W


def _check_powers(instance: ChannelInstance, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != instance.num_users:
        raise DimensionMismatch(f"expected {instance.num_users} powers, got {q.shape[0]}")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError("powers must be finite and nonnegative")
    return q


def gains(instance: ChannelInstance, W) -> np.ndarray:
    """G[k, j] = |h_k^H w_j|^2."""
    return np.abs(instance.H @ W) ** 2


def downlink_sinr(instance: ChannelInstance, W) -> np.ndarray:
    W = _check_beams(instance, W)
    G = gains(instance, W)
    signal = np.diag(G).copy()
    interference = G.sum(axis=1) - signal
    return signal / (interference + instance.sigma2)


def uplink_sinr(instance: ChannelInstance, q, W_tilde) -> np.ndarray:
    """
    Uplink SINR of every user with receive filters `W_tilde`. The receiver noise is
    sigma_k^2 * ||w_k||^2, so the value is invariant to filter scaling and equals the
    textbook expression for unit-norm columns.
    """
    q = _check_powers(instance, q)
    W_tilde = _check_beams(instance, W_tilde)
    G = gains(instance, W_tilde)
    signal = q * np.diag(G)
    # column k collects what user j leaks into receiver k
    interference = q @ G - signal
    norms = np.sum(np.abs(W_tilde) ** 2, axis=0)
    return signal / (interference + instance.sigma2 * norms)


def check_nondegenerate(instance: ChannelInstance) -> None:
    zero = np.flatnonzero(np.linalg.norm(instance.H, axis=1) == 0.0)
    if zero.size:
        raise DegenerateInstance(f"users {zero.tolist()} have all-zero channels")


def mmse_filters(instance: ChannelInstance, q) -> np.ndarray:
    """
    Unit-norm uplink MMSE receivers, one column per user:
    w_k proportional to (sigma_k^2 I + sum_j q_j h_j h_j^H)^-1 h_k.
    """
    q = _check_powers(instance, q)
    check_nondegenerate(instance)
    H = instance.H
    M = instance.num_antennas
    covariance = (H.conj().T * q) @ H
    channels = H.conj().T
    W = np.empty((M, instance.num_users), dtype=np.complex128)
    for sigma2 in np.unique(instance.sigma2):
        users = np.flatnonzero(instance.sigma2 == sigma2)
        W[:, users] = hermitian_solve(covariance + sigma2 * np.eye(M), channels[:, users])
    return W / np.linalg.norm(W, axis=0, keepdims=True)


def min_sinr_db(sinr) -> float:
    return float(10.0 * np.log10(np.min(sinr)))
