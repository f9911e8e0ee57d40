"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class DataError(ValueError):
    """Input data is malformed (non-finite values, unparseable cells, ...)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (non-convergence, indefinite matrix, ...)."""


class ModelFormatError(ValueError):
    """A serialized model file is malformed or has an unsupported version."""
