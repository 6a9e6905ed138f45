"""Exception hierarchy.

Two families matter to callers: ``ValidationError`` (bad inputs or
configuration; CLI exit code 1) and ``NumericalError`` (the computation
itself failed or a numerical precondition was violated; CLI exit code 2).
"""


class GossipPcaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GossipPcaError):
    """Invalid arguments, configuration, or preconditions checkable up front."""


class NumericalError(GossipPcaError):
    """Numerical failure detected while running."""


class DimensionMismatch(ValidationError):
    """Operands have incompatible dimensions."""


class InvalidGap(ValidationError):
    """Requested accuracy is incompatible with the spectral gap (theta >= 1 - l2)."""


class DegenerateSpectrum(NumericalError):
    """Leading eigenvalue is not strictly dominant (or not positive)."""


class NonFiniteValue(NumericalError):
    """NaN or Inf appeared in node values; a normalization step is missing."""


class MaxRoundsExceeded(NumericalError):
    """Gossip averaging hit its round cap before reaching the target precision."""


class RankDeficientGram(NumericalError):
    """Gram matrix of the tracked block collapsed; vectors are no longer independent."""


class ZeroInnerProduct(NumericalError):
    """Inner product with the initial vector vanished; resample the start."""


class TargetGapUnreachable(NumericalError):
    """Synthetic matrix construction could not hit the requested eigenvalue ratio."""


class NoMeetingPoint(NumericalError):
    """Coupled trajectories never met within the cap; result is censored."""
