"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, sizes, or parameter layout."""


class DataError(ValueError):
    """Bad input data (non-positive prices, unreadable rows, ...)."""


class IngestionError(DataError):
    """A CSV file could not be parsed; carries the offending location."""

    def __init__(self, message, path=None, row=None):
        location = ""
        if path is not None:
            location = f"{path}"
            if row is not None:
                location += f":{row}"
            location += ": "
        super().__init__(location + message)
        self.path = path
        self.row = row


class NumericalError(RuntimeError):
    """NaN or infinity detected during training or optimization."""
