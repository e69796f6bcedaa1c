"""Custom exceptions for maxsamples."""


class MaxSamplesError(Exception):
    """Base exception for maxsamples errors."""

    pass


class ConfigurationError(MaxSamplesError):
    """Exception raised for configuration errors."""

    pass


class DimensionError(MaxSamplesError, ValueError):
    """Raised when array shapes do not line up."""


class ProblemError(MaxSamplesError):
    """Exception raised for an invalid problem instance."""

    pass


class FrozenFeatureError(ProblemError):
    """Raised when a frozen feature differs from its original value."""


class DataError(MaxSamplesError):
    """Raised for degenerate datasets and malformed input files."""


class NumericalError(MaxSamplesError, ValueError):
    """Raised when a numerical primitive receives non-finite input."""


class SolverDivergedError(MaxSamplesError):
    """Raised when a solver produces a non-finite Lagrangian."""

    def __init__(self, solver: str, outer: int, inner: int, detail: str = ""):
        self.solver = solver
        self.outer = outer
        self.inner = inner
        message = (
            f"{solver} diverged at outer iteration {outer}, inner iteration {inner}"
        )
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class KnapsackSizeError(MaxSamplesError):
    """Raised when the exhaustive knapsack oracle is asked for too many items."""
