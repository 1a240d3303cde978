"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates an operation's preconditions (shape, range, ...)."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``off_norm`` carries the remaining off-diagonal Frobenius norm.
    """

    def __init__(self, message, off_norm=float("nan")):
        super().__init__(message)
        self.off_norm = off_norm


class NonFiniteError(FloatingPointError):
    """NaN or inf where finite values are required.

    ``layer`` is the offending layer index when known, else ``None``.
    """

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` is the dotted path."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
