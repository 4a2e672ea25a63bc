class NeurocamError(Exception):
    """Base class for package errors."""


class ShapeError(NeurocamError, ValueError):
    """Tensor shapes incompatible with the requested operation."""


class DataError(NeurocamError, ValueError):
    """Malformed or contract-violating input data/files."""


class NumericError(NeurocamError, ArithmeticError):
    """Non-finite values or degenerate numeric states."""
