"""Exception hierarchy."""


class AirError(Exception):
    """Base class for all package errors."""


class InvalidInputError(AirError, ValueError):
    pass


class DimensionError(InvalidInputError):
    pass


class UnsupportedLossError(AirError, ValueError):
    pass


class DivergenceError(AirError, RuntimeError):
    """Raised when a solver run blows up; carries the last diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NonFiniteError(DivergenceError):
    pass


class ConfigError(AirError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DataFormatError(AirError, ValueError):
    pass


class WrongMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class HeaderMismatchError(DataFormatError):
    pass


class ParseError(DataFormatError):
    pass
