"""Exception hierarchy shared by every module."""


class BenchError(Exception):
    """Base class for all errors raised by dnnbench."""


class ShapeError(BenchError, ValueError):
    pass


class TensorIndexError(BenchError, IndexError):
    pass


class DataError(BenchError, ValueError):
    pass


class GraphError(BenchError):
    pass


class WeightError(BenchError):
    """A weight blob is missing or does not conform to its layer."""

    def __init__(self, layer, message):
        super().__init__(f"{layer}: {message}")
        self.layer = layer


class PersistenceError(BenchError, OSError):
    pass


class InputError(BenchError, ValueError):
    pass


class ReportError(BenchError, ValueError):
    pass


class ConfigError(BenchError, ValueError):
    """An invalid combination of command-line or config-file settings."""
