"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 2,
resource budgets with 3 and numerical failures with 4.
"""


class WickfieldError(Exception):
    """Base class for all package errors."""


class ConfigError(WickfieldError, ValueError):
    """Invalid experiment configuration."""


class BudgetExceededError(WickfieldError, MemoryError):
    """A computation would exceed the configured memory/work budget.

    Parameters
    ----------
    message : str
        Human readable explanation.
    method : str, optional
        Name of the backend or stage that was attempted.
    requested : float, optional
        Estimated requirement (bytes or element count).
    budget : float, optional
        The budget that was exceeded.
    """

    def __init__(self, message, method=None, requested=None, budget=None):
        super().__init__(message)
        self.method = method
        self.requested = requested
        self.budget = budget


class SymmetryError(WickfieldError, ValueError):
    """Coefficients violate conjugate (Hermitian) symmetry."""


class AliasingError(WickfieldError, ValueError):
    """Physical grid too coarse for an exact pointwise product."""


class NumericalFailure(WickfieldError, ArithmeticError):
    """Base class for numerical failures (exit code 4)."""


class PicardError(NumericalFailure):
    """Fixed-point iteration did not converge within ``max_iter``."""

    def __init__(self, message, step=None, time=None, residual=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.residual = residual


class QuadratureError(NumericalFailure):
    """Requested quadrature tolerance not reached at the configured step."""


class InsufficientSpanError(WickfieldError, ValueError):
    """A rate fit was requested over too short a range of cutoffs."""
