"""Exception hierarchy shared by all modules."""


class TravelWaveError(Exception):
    """Base class; ``details`` is a JSON-serialisable diagnostic payload."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), **self.details}


class ConfigError(TravelWaveError, ValueError):
    """Invalid physical or numerical parameters."""


class DomainError(TravelWaveError, ValueError):
    """Argument outside the domain of a function (e.g. non-finite input)."""


class ShapeError(TravelWaveError, ValueError):
    """Array shape does not match the grid it is paired with."""


class NumericError(TravelWaveError, RuntimeError):
    """An iterative method failed to converge."""


class SearchError(NumericError):
    """A bracketing search found no sign change / bracket."""
