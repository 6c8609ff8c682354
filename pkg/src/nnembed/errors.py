class EmbedError(Exception):
    """Base class for all package errors."""


class ParameterError(EmbedError, ValueError):
    pass


class CapacityError(EmbedError):
    pass


class GenerationError(EmbedError):
    pass


class ModelError(EmbedError):
    pass


class InfeasibleError(ModelError):
    """Raised when a model is proven to have no feasible point."""


class DecodingError(EmbedError):
    pass


class NumericError(EmbedError):
    """Unrecoverable numerical trouble inside the simplex core."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
