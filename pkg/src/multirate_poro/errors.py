"""Exception types shared across the solver."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(ValueError):
    """A run configuration is missing a key or fails validation."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class SingularSystemError(RuntimeError):
    """A linear system could not be factorized or solved."""


class IterationFailureError(RuntimeError):
    """The coupled fixed-point iteration did not converge."""

    def __init__(self, message, iterations=None, history=None):
        super().__init__(message)
        self.iterations = iterations
        self.history = list(history or [])


class StepError(RuntimeError):
    """A time step failed; carries the coarse window index."""

    def __init__(self, window, cause):
        self.window = window
        self.cause = cause
        super().__init__(f"window {window}: {cause}")
