"""
Dense complex linear algebra and deterministic random streams.
"""

from app.numerics.linalg import as_complex_matrix, dominant_eigenpair, hermitian_solve
from app.numerics.random import RandomStream

__all__ = [
    "as_complex_matrix",
    "dominant_eigenpair",
    "hermitian_solve",
    "RandomStream",
]
