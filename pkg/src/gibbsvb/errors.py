"""Exception types shared across the package."""

__all__ = ["NumericalError", "InfeasibleDataError", "UnstableModelError"]


class NumericalError(RuntimeError):
    """A linear-algebra or floating-point failure that jitter could not rescue."""


class InfeasibleDataError(ValueError):
    """The observed data violate a hard constraint of the model (e.g. hard core)."""


class UnstableModelError(ValueError):
    """Parameter values under which the point process density is not integrable."""
