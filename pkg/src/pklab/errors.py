"""Exception and warning types shared across pklab."""


class PklabError(Exception):
    """Base class for all pklab errors."""


class SpecError(PklabError, ValueError):
    """A measure, field or grid spec string could not be parsed."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class PositivityError(PklabError, ValueError):
    """A marginal density went negative at a quadrature node."""


class NodeBudgetError(PklabError, MemoryError):
    """Tensor quadrature would exceed the configured node budget."""


class PreconditionError(PklabError, ValueError):
    """An operation was called outside its domain of validity."""


class HypothesisError(PreconditionError):
    """The measure fails the moment assumption."""


class ConditioningError(PklabError, ArithmeticError):
    """A Gram matrix or pencil is numerically singular or indefinite."""


class QuadratureExactnessWarning(UserWarning):
    """The quadrature rule is not exact for the requested integrand degree."""
