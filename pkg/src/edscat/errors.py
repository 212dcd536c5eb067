"""Exception hierarchy.

Validation problems (bad input, broken invariants, malformed files) derive from
:class:`ValidationError`; failures of the numerical machinery derive from
:class:`NumericalError`.  The command-line front end maps the two families to
exit codes 2 and 3.
"""

from __future__ import annotations


class EdscatError(Exception):
    """Base class for every error raised by this package."""

    step: str | None = None


class ValidationError(EdscatError, ValueError):
    """An input violates a declared invariant."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class FormatError(ValidationError):
    """A serialized document cannot be parsed."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnsupportedMultiplicityError(ValidationError):
    """Operation only defined for simple bound states."""


class NumericalError(EdscatError, ArithmeticError):
    """A numerical procedure failed or produced untrustworthy output."""


class OverflowRiskError(NumericalError):
    """Exponential factors would overflow binary64 on the requested grid."""


class ConditioningError(NumericalError):
    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(f"{message} (estimated condition number {condition:.3e})")
        self.condition = condition


class SingularMapError(NumericalError):
    """A gauge map was evaluated where it has a 1/sqrt(lambda) singularity."""


class NotABoundStateError(NumericalError):
    pass


class RegionError(NumericalError):
    """The search contour passes too close to a zero."""


class ConvergenceError(NumericalError):
    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class InconsistentDataError(NumericalError):
    pass
