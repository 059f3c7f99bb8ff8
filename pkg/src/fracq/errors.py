"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the domain where the quantity is defined."""


class SingularPointError(ArithmeticError):
    """Evaluation requested exactly at a kernel singularity."""


class QuadratureError(RuntimeError):
    """Integration did not reach the requested tolerance.

    The best value and its error estimate are kept on the exception so callers
    can decide whether the result is still usable.
    """

    def __init__(self, message, value=None, error=None):
        super().__init__(message)
        self.value = value
        self.error = error


class ConfigError(ValueError):
    """Invalid run configuration (maps to CLI exit code 2)."""


class ApproximationWarning(UserWarning):
    """A quantity is returned from an asymptotic model rather than a closed form."""
