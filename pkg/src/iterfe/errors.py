"""Exception hierarchy shared by all modules."""


class IterFEError(Exception):
    """Base class for every error raised by the package."""


class DomainError(IterFEError, ValueError):
    """An argument lies outside [0, 1] or violates a structural invariant."""


class BudgetExceeded(IterFEError):
    """Exact branch enumeration would exceed the configured budget."""


class NotPeriodicError(IterFEError):
    """The weighted system carries no ``periodic_order``."""


class OutOfRangeError(IterFEError, IndexError):
    """An iterate index exceeds the size of a precomputed table."""


class InsufficientLengthError(IterFEError, ValueError):
    """A sequence is too short for the requested Cesaro windows."""


class BoundaryViolation(IterFEError, ValueError):
    """The forcing term does not vanish at 0 and 1."""


class NotSolvableError(IterFEError):
    """The equation provably has no bounded solution.

    ``violations`` lists ``(x, value)`` witnesses.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class GUnboundedError(NotSolvableError):
    """The partial sums g_k grow without bound."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NoUniformConvergence(IterFEError):
    """The Neumann series could not be certified to converge uniformly."""


class NotUniformWeights(IterFEError, ValueError):
    pass


class HypothesisNotMet(IterFEError):
    pass


class TooManyUnresolved(IterFEError):
    """Too many simulated trajectories never reached an endpoint."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class SpecParseError(IterFEError):
    pass


class SpecValidationError(IterFEError):
    """Raised with every violated invariant collected in ``problems``."""

    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)
