"""Exception types shared across the package.

The CLI maps these to exit codes: DataError -> 2, NumericalError -> 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(ArithmeticError):
    """An optimizer produced a non-finite value or otherwise broke down."""
