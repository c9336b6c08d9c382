"""Exception hierarchy for the workbench.

Every error raised on a user-reachable path derives from WorkbenchError so
the CLI can map failures to exit codes without pattern matching on strings.
"""


class WorkbenchError(Exception):
    """Base class for all workbench failures."""


class InvalidScenario(WorkbenchError):
    """Scenario input violates a precondition (zero distribution, constant q, ...)."""


class DegenerateSpace(WorkbenchError):
    """Condition space has a dependent basis or identically-zero tau function."""


class RootNotRepresentable(WorkbenchError):
    """q given in coefficient form has a root outside Q(i) (or past search limits)."""


class NotFoundWithinBound(WorkbenchError):
    """No spectral-ring polynomial exists up to the requested degree bound."""


class NotLiftable(WorkbenchError):
    """A coefficient that must be an exponential polynomial has a true x-denominator."""


class ConstancyViolation(WorkbenchError):
    """An operator that must have constant coefficients does not."""


class EigenCheckFailed(WorkbenchError):
    """A symbolic eigenvalue identity left a nonzero residual."""


class NotInRing(WorkbenchError):
    """Right division left a nonzero remainder: the polynomial is not in the spectral ring."""


class PoleProximity(WorkbenchError):
    """Numeric oracle could not find sample points away from denominator zeros."""


class ParseError(WorkbenchError):
    """Text/JSON input could not be parsed; carries location context when known."""

    def __init__(self, message, context=None):
        super().__init__(message if context is None else f"{message} (at {context})")
        self.context = context
