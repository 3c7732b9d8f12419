"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid or inconsistent problem/solver parameters."""


class NumericError(RuntimeError):
    """An iterative numerical routine failed to converge."""
