"""Error types shared across the package."""


class MmRelayError(Exception):
    """Base class for all package errors."""


class ConfigError(MmRelayError):
    """Invalid or malformed scenario configuration."""


class NumericError(MmRelayError):
    """A numerical routine failed (non-convergence, singular input, ...)."""


class NotPsdError(NumericError):
    """Matrix is not positive semidefinite within tolerance."""


class ConvergenceError(NumericError):
    """Iterative solver exceeded its iteration budget."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class DegenerateChannelError(NumericError):
    """Realized channels give a zero power-normalization denominator."""
