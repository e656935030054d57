"""Exception types shared by the toolkit."""


class TwoFluidError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(TwoFluidError, ValueError):
    """Bad input, configuration or violated precondition.

    ``messages`` holds every problem found when a caller collects several
    of them (config parsing), so the CLI can report them all at once.
    """

    def __init__(self, message: str, messages: list[str] | None = None):
        super().__init__(message)
        self.messages = list(messages) if messages else [message]


class NumericalAbort(TwoFluidError, RuntimeError):
    """A computation left the regime where its results mean anything."""


class ConvergenceError(NumericalAbort):
    """An iterative solve stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual
