"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2.
"""


class ValidationError(ValueError):
    """Bad input: invalid parameters, malformed files, inconsistent data."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed (divergence, singular matrix, no convergence)."""
