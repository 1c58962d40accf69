"""Shared exception types."""


class BudgetExceededError(RuntimeError):
    """An enumeration or search exceeded its configured budget."""


class InfeasibleConstraintsError(ValueError):
    """No database satisfies the recorded constraint answers."""


class NonSparseConstraintsError(ValueError):
    """Constraint set is not sparse with respect to the secret graph."""


class ShapeNotRecognizedError(ValueError):
    """Constraint set does not match any specialized sensitivity shape."""


class InfiniteSensitivityError(ValueError):
    """The query cannot be released with finite noise under this policy."""
