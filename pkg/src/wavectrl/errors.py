"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DimensionError(ValueError):
    """Grid or array dimensions incompatible with the requested operation."""


class ParameterError(ValueError):
    """A physical or numerical parameter outside its valid range."""


class GradientError(ArithmeticError):
    """Non-finite gradient values in a named parameter tensor."""

    def __init__(self, tensor: str):
        self.tensor = tensor
        super().__init__(f"non-finite gradient in parameter tensor '{tensor}'")


class BlowUpError(ArithmeticError):
    """Non-finite values appeared during integration (CLI exit code 3).

    ``field`` names the first offending state component.
    """

    def __init__(self, field: str, t: float | None = None):
        self.field = field
        self.t = t
        where = f" at t={t:.6g}s" if t is not None else ""
        super().__init__(f"non-finite values in field '{field}'{where}")
