"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Inconsistent sizes, empty splits, bad mappings and the like."""


class NumericalError(ArithmeticError):
    """Non-finite values or a failed factorization."""


class SamplingError(RuntimeError):
    """No valid negative tuple could be produced."""


class GenerationError(RuntimeError):
    """The synthetic generator could not satisfy its constraints."""


class FormatError(ValueError):
    """Malformed input file. ``lineno`` is 1-based when known."""

    def __init__(self, message, path=None, lineno=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if lineno is not None:
                where += f":{lineno}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno
