"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid arguments, dimensions or configuration."""


class DegenerateInputError(ParameterError):
    """Input for which the requested quantity is not uniquely defined (e.g. c = 0)."""


class NumericalError(RuntimeError):
    """An iterative method failed to converge.

    Carries the diagnostics of the last iterate in ``details``.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details
