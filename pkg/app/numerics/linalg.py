import logging
from typing import Optional, Tuple

import numpy as np
from scipy import linalg as sla

from app.config import settings
from app.errors import DimensionMismatch, NoConvergence, NotPositiveDefinite

logger = logging.getLogger(__name__)


def as_complex_matrix(a, *, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D complex128 array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def hermitian_solve(a, b, *, herm_tol: float = 1e-10) -> np.ndarray:
    """
    Solve A x = b for Hermitian positive-definite A via a Cholesky factorization.
    `b` may be a vector or a matrix of right-hand sides.
    """
    a = as_complex_matrix(a, name="A")
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatch(f"A must be square, got {a.shape}")
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != n:
        raise DimensionMismatch(f"b has {b.shape[0]} rows, A is {n}x{n}")
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    if np.abs(a - a.conj().T).max() > herm_tol * scale:
        raise ValueError("A is not Hermitian within tolerance")
    try:
        factor = sla.cho_factor(a, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return sla.cho_solve(factor, b, check_finite=False)


def dominant_eigenpair(
    a,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    *,
    shift: float = 0.0,
) -> Tuple[float, np.ndarray]:
    """
    Perron eigenpair of a nonnegative irreducible matrix by power iteration.

    The returned vector is strictly positive and scaled so its last entry is 1.
    `shift` adds shift*I to the iteration matrix; it is 0 by default so that an
    imprimitive spectrum (tied moduli) surfaces as NoConvergence instead of being
    silently resolved. The extended coupling matrices built by the solver have a
    positive corner entry, hence are primitive and converge unshifted.
    """
    tol = settings.EIG_TOL if tol is None else tol
    max_iter = settings.EIG_MAX_ITER if max_iter is None else max_iter
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("matrix must be finite and elementwise nonnegative")

    iterate = a + shift * np.eye(n) if shift else a
    # Non-uniform positive start so symmetric degeneracies are not hit by accident.
    v = 1.0 + np.arange(n, dtype=np.float64) / n
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = iterate @ v
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            raise NoConvergence("iterate collapsed to zero (reducible matrix)", it)
        v = y / y_norm
        av = a @ v
        lam = float(v @ av)
        residual = np.linalg.norm(av - lam * v)
        if residual <= tol * min(1.0, abs(lam)):
            break
    else:
        raise NoConvergence(f"power iteration did not converge in {max_iter} steps", max_iter)

    if v[-1] <= 0.0:
        raise NoConvergence("dominant eigenvector has a non-positive last entry", it)
    v = v / v[-1]
    if np.any(v <= 0.0):
        # Entries can underflow to zero for nearly reducible inputs; keep the Perron sign pattern.
        v = np.maximum(v, np.finfo(float).tiny)
    logger.debug("power iteration converged in %d steps (lambda=%.6g)", it, lam)
    return lam, v
