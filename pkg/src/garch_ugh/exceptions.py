class DataError(ValueError):
    """Malformed or invalid input data."""


class EstimationError(ArithmeticError):
    """A fit or estimator hit a degenerate configuration."""
