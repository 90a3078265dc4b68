"""Exception types raised by the simulator."""


class InvalidParameterError(ValueError):
    """A parameter is outside its valid range."""


class DegenerateResidualError(ArithmeticError):
    """The residual has no energy left to match against."""


class SingularProjectionError(ArithmeticError):
    """The selected dictionary columns are rank deficient."""


class InsufficientDataError(ValueError):
    """Not enough records to compute a requested metric."""


class ConfigError(ValueError):
    """Experiment configuration is invalid.

    ``field`` names the offending configuration key.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
