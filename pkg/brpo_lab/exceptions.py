"""
Exception tree shared by every app of the project.
"""


class BrpoError(Exception):
    """Base class for all domain errors raised by the lab."""


class DimensionMismatchError(BrpoError, ValueError):
    """Tables handed to an operation do not agree on |S| or |A|."""

    def __init__(self, message, expected=None, actual=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class InvalidModelError(BrpoError, ValueError):
    """A probability table, reward table or discount breaks its invariants."""


class ConstraintViolationError(BrpoError):
    """Confidence values violate the per-state equality or box constraints."""

    def __init__(self, message, residuals=None, states=None):
        super().__init__(message)
        self.residuals = residuals
        self.states = list(states) if states is not None else []


class SupportMismatchError(BrpoError):
    """An importance ratio or KL divergence is undefined at a state-action pair."""

    def __init__(self, message, state=None, action=None):
        super().__init__(message)
        self.state = state
        self.action = action


class QpError(BrpoError):
    """The confidence quadratic program cannot be solved with the requested method."""


class ConvergenceError(BrpoError):
    """An iterative procedure stopped before reaching its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptyBatchError(BrpoError, ValueError):
    """An operation needs at least one transition."""


class BatchFormatError(BrpoError):
    """A batch file line could not be parsed."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigurationError(BrpoError):
    """Experiment configuration does not match the requested algorithm."""
