"""
Max-min SINR balancing under a total power budget via uplink-downlink duality.

The uplink problem is solved by alternating MMSE receivers and the dominant eigenvector of the
extended coupling matrix; the downlink powers then follow from the same receivers used as
transmit directions.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from app.balancing.sinr import check_nondegenerate, downlink_sinr, gains, mmse_filters
from app.channels.models import ChannelInstance
from app.config import settings
from app.errors import NoConvergence
from app.numerics import dominant_eigenpair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UplinkAllocation:
    q: np.ndarray
    balanced_sinr: float
    iterations: int = 0


@dataclass(frozen=True)
class DownlinkSolution:
    W: np.ndarray
    W_tilde: np.ndarray
    p: np.ndarray
    sinr: np.ndarray

    @property
    def min_sinr(self) -> float:
        return float(np.min(self.sinr))

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.W) ** 2))


def coupling(instance: ChannelInstance, W_tilde: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(D, Psi): D = 1/|h_k^H w_k|^2 and Psi[k, j] = |h_k^H w_j|^2 off the diagonal."""
    G = gains(instance, W_tilde)
    D = 1.0 / np.diag(G)
    Psi = G.copy()
    np.fill_diagonal(Psi, 0.0)
    return D, Psi


def extended_matrix(D: np.ndarray, cross: np.ndarray, sigma2: np.ndarray, power: float) -> np.ndarray:
    """[[D X, D sigma], [1^T D X / P, 1^T D sigma / P]] for cross-coupling X."""
    K = D.shape[0]
    top = D[:, None] * cross
    noise = D * sigma2
    out = np.empty((K + 1, K + 1))
    out[:K, :K] = top
    out[:K, K] = noise
    out[K, :K] = top.sum(axis=0) / power
    out[K, K] = noise.sum() / power
    return out


def uplink_matrix(instance: ChannelInstance, W_tilde: np.ndarray) -> np.ndarray:
    D, Psi = coupling(instance, W_tilde)
    return extended_matrix(D, Psi.T, instance.sigma2, instance.power)


def downlink_matrix(instance: ChannelInstance, W_tilde: np.ndarray) -> np.ndarray:
    D, Psi = coupling(instance, W_tilde)
    return extended_matrix(D, Psi, instance.sigma2, instance.power)


def recover_downlink(instance: ChannelInstance, q) -> DownlinkSolution:
    """Downlink beamformers from (possibly predicted) uplink powers; always spends the full budget."""
    W_tilde = mmse_filters(instance, q)
    _, v = dominant_eigenpair(downlink_matrix(instance, W_tilde))
    p = v[: instance.num_users]
    W = W_tilde * np.sqrt(p)[None, :]
    return DownlinkSolution(W=W, W_tilde=W_tilde, p=p, sinr=downlink_sinr(instance, W))


def solve_balancing(
    instance: ChannelInstance,
    tol: Optional[float] = None,
    max_outer: Optional[int] = None,
) -> Tuple[UplinkAllocation, DownlinkSolution]:
    tol = settings.SOLVER_TOL if tol is None else tol
    max_outer = settings.SOLVER_MAX_OUTER if max_outer is None else max_outer
    check_nondegenerate(instance)

    K = instance.num_users
    q = np.full(K, instance.power / K)
    level = 0.0
    for it in range(1, max_outer + 1):
        W_tilde = mmse_filters(instance, q)
        lam, v = dominant_eigenpair(uplink_matrix(instance, W_tilde))
        q = v[:K]
        new_level = 1.0 / lam
        if abs(new_level - level) <= tol * new_level:
            level = new_level
            break
        level = new_level
    else:
        raise NoConvergence(f"balanced level still moving after {max_outer} outer iterations", max_outer)

    # rescale away round-off so the budget holds exactly
    q = q * (instance.power / q.sum())
    downlink = recover_downlink(instance, q)
    logger.debug("balanced K=%d in %d iterations, level %.6g", K, it, level)
    return UplinkAllocation(q=q, balanced_sinr=float(level), iterations=it), downlink
