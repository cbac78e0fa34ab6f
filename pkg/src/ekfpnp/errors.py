"""Exception types shared across the package."""


class EKFPnPError(Exception):
    """Base class for all package errors."""


class CheiralityViolation(EKFPnPError):
    """A point lies at or behind the camera plane.

    ``indices`` lists the offending point indices when known.
    """

    def __init__(self, message: str, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


class SingularInnovation(EKFPnPError):
    """The innovation covariance could not be factorized."""


class DegenerateConfiguration(EKFPnPError):
    """The point configuration does not determine a unique pose."""


class ConfigError(EKFPnPError):
    """A configuration produces an invalid scene or trajectory."""


class ZeroEstimate(EKFPnPError):
    """A relative error was requested against a zero-length estimate."""


class InitializationFailure(EKFPnPError):
    """The filter could not be bootstrapped from the first frames."""
