"""Exception types shared across the pipeline.

The CLI maps each class to its own exit status, so callers can tell a bad
input file from a physically inadmissible atmosphere or a solver that did
not converge.
"""


class LeeWaveError(Exception):
    """Base class for all package errors."""


class ConfigError(LeeWaveError):
    """A configuration file or flag could not be parsed."""


class InputValidationError(LeeWaveError, ValueError):
    """Input data violate a precondition (ordering, positivity, grid shape)."""


class AssumptionError(LeeWaveError, ValueError):
    """The atmosphere does not admit a positive asymptotic Scorer constant."""


class ConvergenceError(LeeWaveError, RuntimeError):
    """A numerical procedure failed to reach its tolerance."""
