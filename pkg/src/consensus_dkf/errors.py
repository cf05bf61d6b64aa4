"""Errors raised by the lab."""


class DisconnectedNetworkError(ValueError):
    """A network could not be made connected."""


class UnobservableError(ValueError):
    """A system pair fails the observability rank test."""


class RankDeficientError(ValueError):
    """A random auxiliary matrix stayed rank deficient."""


class RangeMismatchError(ValueError):
    """A fused observation matrix leaves the range of its noise covariance."""


class AsymmetricMatrixError(ValueError):
    """A matrix that should be symmetric is not."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration did not converge."""


class UnstableLyapunovError(ConvergenceError):
    """The coupling matrix of a Lyapunov equation is not Schur stable."""
