"""Exception types shared across the package."""


class DriftFilterError(Exception):
    """Base class for errors raised by driftfilter."""


class CsvFormatError(DriftFilterError, ValueError):
    """A CSV file does not follow the expected layout.

    The offending 1-based line number is available as ``lineno``.
    """

    def __init__(self, message, path=None, lineno=None):
        where = []
        if path is not None:
            where.append(str(path))
        if lineno is not None:
            where.append(f"line {lineno}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.lineno = lineno


class NumericError(DriftFilterError, ArithmeticError):
    """A non-finite value appeared in a named computation stage."""

    def __init__(self, stage, message=None):
        super().__init__(message or f"non-finite values in stage '{stage}'")
        self.stage = stage


class InvariantError(DriftFilterError, RuntimeError):
    """An internal invariant that should be impossible to break was broken."""


class TrainingError(DriftFilterError, RuntimeError):
    """Gradient descent diverged."""

    def __init__(self, iteration, message=None):
        super().__init__(message or f"loss became non-finite at iteration {iteration}")
        self.iteration = iteration


class UndefinedBaselineError(DriftFilterError, ValueError):
    """A percent change was requested against a zero baseline."""


class DegenerateInputError(DriftFilterError, ValueError):
    """A statistic is undefined for the supplied input."""
