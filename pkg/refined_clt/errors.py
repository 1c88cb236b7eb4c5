"""Exception hierarchy shared by the library and the CLI."""

# ============================================================================
# Custom Exceptions
# ============================================================================
# exit_code tells the CLI which status to return when the error escapes a command


class RefinedCltError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code: int = 4

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class DomainError(RefinedCltError):
    """
    A precondition on an argument does not hold (x below x0, k >= n, F(t) = 0 ...).
    Rejected before any sampling starts.
    """

    exit_code = 2


class UnsupportedVariantError(RefinedCltError):
    """
    The requested approximation variant is not defined for the tail index
    (finite-variance form for xi >= 1/2, stable baseline for xi <= 1/2 ...).
    """

    exit_code = 2


class ConfigurationError(RefinedCltError):
    """Configuration is incomplete or contradictory (custom family without delta ...)."""

    exit_code = 2


class BudgetExceededError(RefinedCltError):
    """
    The run would exceed the replicate budget (n * reps above the cap).
    Never truncated silently: the command refuses to start.
    """

    exit_code = 3


class NumericalError(RefinedCltError):
    """Quadrature, root bracketing or another numeric routine failed to converge."""

    exit_code = 4
