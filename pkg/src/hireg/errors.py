"""Exception types raised by hireg."""


class HiregError(ValueError):
    """Base class for all library errors."""


class DimensionError(HiregError):
    """Array shapes do not agree."""


class NotSymmetricError(HiregError):
    """A matrix expected to be symmetric is not, beyond tolerance."""


class SingularMatrixError(HiregError):
    """A matrix that must be inverted is numerically singular."""


class SpectralRadiusError(HiregError):
    """The series convergence condition rho(R (N + R)^-1) < 1 does not hold."""


class ParameterError(HiregError):
    """A regularization parameter lies outside its admissible range."""
