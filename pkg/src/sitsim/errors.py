"""Exception types; the CLI maps each family to an exit code."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(RuntimeError):
    """A computation produced non-finite or inadmissible values."""


class IntegrationError(NumericalError):
    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.4f} d")
        self.t = t


class NoEquilibriumError(NumericalError):
    """No day of the window admits the lower equilibrium E1."""
