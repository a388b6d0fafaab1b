"""
Exception hierarchy shared by the solver, generators, network and trainers.
Outer surfaces translate these: `app/api.py` to HTTP status codes, `app/cli.py` to exit codes.
"""


class BeamformingError(Exception):
    """Base class for every library error."""


class InvalidConfig(BeamformingError, ValueError):
    pass


# numerics
class NotPositiveDefinite(BeamformingError):
    pass


class NoConvergence(BeamformingError):
    def __init__(self, message: str, iterations: int = 0):
        super().__init__(message)
        self.iterations = iterations


class DimensionMismatch(BeamformingError, ValueError):
    pass


# channels
class UnknownModel(BeamformingError, ValueError):
    pass


class OutOfRange(BeamformingError, ValueError):
    pass


class NonPositiveDistance(OutOfRange):
    pass


# balancing / datasets
class DegenerateInstance(BeamformingError):
    pass


class DatasetGenerationError(BeamformingError):
    """Raised when too many draws fail to converge."""


class PoolTooSmall(BeamformingError, ValueError):
    pass


# network
class ShapeMismatch(BeamformingError, ValueError):
    pass


class GraphNotRecorded(BeamformingError):
    pass


class VersionMismatch(BeamformingError):
    pass


class CorruptPayload(BeamformingError):
    pass


class NonFiniteLoss(BeamformingError, FloatingPointError):
    pass


# online
class EmptyHistory(BeamformingError):
    pass
