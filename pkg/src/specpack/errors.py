"""Exception hierarchy shared by every module."""


class SpecpackError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SpecpackError, ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(SpecpackError, ValueError):
    """A space or input file violates a structural invariant."""


class ParseError(ValidationError):
    """Malformed input file."""


class HypothesisError(SpecpackError):
    """The covering / small-ball hypotheses needed by a construction fail."""

    def __init__(self, message, *, suggested_r=None):
        super().__init__(message)
        self.suggested_r = suggested_r


class ConstructionError(SpecpackError):
    """A constructed set failed one of its guaranteed postconditions."""

    def __init__(self, message, *, condition=None, step=None):
        super().__init__(message)
        self.condition = condition
        self.step = step


class ConvergenceError(SpecpackError):
    """Iterative eigensolver did not converge."""


class InvariantError(SpecpackError, AssertionError):
    """An internal invariant that should hold by construction was violated."""


class PreconditionError(DomainError):
    """Inputs are individually valid but jointly violate an operation's contract."""
