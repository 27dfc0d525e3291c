"""Exception hierarchy shared by every module of the package."""


class OutctrlError(Exception):
    """Base class for all errors raised by :mod:`outctrl`."""


class DimensionError(OutctrlError, ValueError):
    """Matrix or vector shapes are inconsistent.

    ``field`` names the offending operand, ``expected``/``actual`` carry
    human-readable shape descriptions when available.
    """

    def __init__(self, message, field=None, expected=None, actual=None):
        super().__init__(message)
        self.field = field
        self.expected = expected
        self.actual = actual


class DomainError(OutctrlError, ValueError):
    """An argument lies outside the domain of the operation (e.g. t <= 0)."""


class NumericFailure(OutctrlError, ArithmeticError):
    """A decomposition failed to converge or produced non-finite output."""


class TargetUnreachable(OutctrlError):
    """The right-hand side does not lie in the image of the Gramian."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NotOutputControllable(OutctrlError):
    """Raised when a steering problem is posed on a system that fails the
    Hautus output test. ``verdict`` holds the failing test result."""

    def __init__(self, message, verdict):
        super().__init__(message)
        self.verdict = verdict


class GenerationError(OutctrlError):
    """Random system generation exhausted its retry budget."""


class FormatError(OutctrlError, ValueError):
    """A JSON document does not follow the expected schema."""
