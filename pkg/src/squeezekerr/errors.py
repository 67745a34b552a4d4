"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line driver can map
failures onto distinct process exit statuses without a lookup table.
"""


class SqueezeKerrError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SqueezeKerrError, ValueError):
    """Invalid user-supplied parameters."""

    exit_code = 2


class DimensionMismatch(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class NonPositiveValue(ConfigError):
    pass


class NonPositiveRate(ConfigError):
    pass


class NumericalError(SqueezeKerrError, RuntimeError):
    """A numerical procedure failed to meet its accuracy contract."""

    exit_code = 3


class ToleranceNotMet(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class WindowExhausted(NumericalError):
    """The negativity was still rising at the end of the time scan."""

    def __init__(self, message, t_last=None, n_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.n_last = n_last


class CutoffError(SqueezeKerrError):
    """The truncated Fock basis is too small for the requested state."""

    exit_code = 4


class CutoffTooSmall(CutoffError, ValueError):
    pass


class CutoffLeak(CutoffError, RuntimeError):
    pass
