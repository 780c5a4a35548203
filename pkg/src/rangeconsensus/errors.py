"""Exception hierarchy.

Everything raised on purpose by this package derives from
:class:`RangeConsensusError`, so callers driving a closed loop can catch
estimation failures in one place and decide whether to gate or abort.
"""


class RangeConsensusError(Exception):
    pass


# kinematics / spectral preconditions
class CoincidentCenters(RangeConsensusError, ValueError):
    pass


class IndexOverflow(RangeConsensusError, ValueError):
    pass


class ZeroIndex(RangeConsensusError, ValueError):
    pass


class IndexClash(RangeConsensusError, ValueError):
    pass


# estimator failures; these are expected inside a running loop
class EstimationError(RangeConsensusError):
    pass


class NoPeak(EstimationError):
    pass


class AmbiguousSpectrum(EstimationError):
    pass


class SingularSystem(EstimationError):
    pass


class DegenerateRadius(EstimationError, ValueError):
    pass


class AmbiguousSign(EstimationError):
    pass


class RejectedEstimate(EstimationError):
    """Raised when the model residual exceeds the configured gate."""


class NoWindow(RangeConsensusError):
    pass


class EmptyNeighborhood(RangeConsensusError, ValueError):
    pass


class Diverged(RangeConsensusError, ArithmeticError):
    """The closed loop produced non-finite states."""


# scenario handling
class ValidationError(RangeConsensusError, ValueError):
    pass


class ParseError(RangeConsensusError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
