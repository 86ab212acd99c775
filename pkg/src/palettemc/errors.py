"""Exception types shared across the package.

The CLI maps these onto exit codes: validation failures exit 1, numerical
degeneracies exit 2, I/O problems exit 3.
"""


class ValidationError(ValueError):
    """Contract violation: bad dimensions, malformed input, broken config."""


class DegeneracyError(RuntimeError):
    """Numerical degeneracy that valid inputs should never produce."""


class DegeneratePaletteError(DegeneracyError):
    """Every model assigns zero posterior weight to a palette point."""


class ReducibleChainError(DegeneracyError):
    """Transition matrix has no unique stationary distribution."""
