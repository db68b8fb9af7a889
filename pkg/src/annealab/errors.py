"""Exception types shared across the package."""


class AnnealabError(Exception):
    """Base class for all package errors."""


class UsageError(AnnealabError):
    """Caller misuse: dimension mismatch, invalid arguments, empty inputs."""


class NumericError(AnnealabError):
    """Numerical failure: quadrature non-convergence, overflow, non-finite states."""
