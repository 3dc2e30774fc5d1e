"""Exception types shared across the package."""


class RegbarError(Exception):
    """Base class for all regbar errors."""


class DomainError(RegbarError, ValueError):
    """An argument is outside the domain a function is defined on."""


class ParseError(RegbarError):
    """A text input could not be parsed; carries the offending line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class IntegrityError(RegbarError):
    """Input rows contradict each other (e.g. one cell, two codes)."""


class EmptyPanelError(RegbarError):
    """A filter or load produced a panel with nothing left in it."""


class CoverageError(RegbarError):
    """A lookup table does not cover every key it must."""


class ConfigError(RegbarError):
    """A configuration file or option set is unusable."""


class InternalStateError(RegbarError):
    """Sampler state violates an invariant that only corruption can break."""
