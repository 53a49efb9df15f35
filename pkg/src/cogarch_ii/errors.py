"""Exception and warning types raised by the package."""


class CogarchError(Exception):
    """Base class for all package errors."""


class MomentUndefinedError(CogarchError, ValueError):
    """A requested Lévy moment (or Laplace exponent) diverges."""


class UnsupportedModelError(CogarchError, NotImplementedError):
    """The operation is not available for this driving Lévy model."""


class NonStationaryError(CogarchError, ValueError):
    """Parameter violates Psi(1) < 0, so no stationary volatility exists."""


class OutsideParameterSpaceError(CogarchError, ValueError):
    """Parameter lies outside the moment region M (Psi(2) >= 0)."""


class DegenerateAutocovarianceError(CogarchError, ValueError):
    """Autocovariance Toeplitz matrix is singular or badly conditioned."""


class MomentShapeError(CogarchError, ValueError):
    """Empirical autocovariances contradict the exponential COGARCH shape."""


class InsufficientDataError(CogarchError, ValueError):
    """Sample too short for the requested lags or truncation."""


class EmptyGridError(CogarchError, ValueError):
    """No grid point survived the feasibility filter."""


class ConfigError(CogarchError, ValueError):
    """Invalid study or CLI configuration."""


class ClampWarning(UserWarning):
    """An auxiliary estimate was projected onto the compact parameter set."""


class BoundaryWarning(UserWarning):
    """A recovered quantity sits on the boundary of its admissible region."""


class RankWarning(UserWarning):
    """A Jacobian is numerically rank deficient."""


class ConvergenceWarning(UserWarning):
    """An optimizer stopped without meeting its tolerance."""


class SingularMatrixError(CogarchError, ValueError):
    """A matrix that must be inverted is numerically singular."""
