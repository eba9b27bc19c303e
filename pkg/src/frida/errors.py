class FridaError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(FridaError, ValueError):
    """Invalid argument or configuration value."""


class DegenerateMappingError(FridaError):
    """Mapping matrix is rank deficient for the requested truncation."""


class NumericalFailure(FridaError):
    """A linear-algebra step failed despite regularization."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
