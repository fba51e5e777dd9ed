class ValidationError(ValueError):
    """Bad input: out-of-range parameter, malformed file, inconsistent shapes."""


class NumericalError(ArithmeticError):
    """A numerical step failed (singular innovation covariance, etc.)."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
