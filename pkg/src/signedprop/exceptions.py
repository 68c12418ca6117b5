"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class UndefinedMetricError(ValueError):
    """A metric has no defined value for the given input."""


class EdgeListParseError(ValueError):
    """Malformed signed edge-list file."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericFailureError(FloatingPointError):
    """NaN or Inf appeared during propagation."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite values appeared at step {step}")


class DegenerateTrainingError(ValueError):
    """Training set cannot support a classifier (e.g. a single class)."""
