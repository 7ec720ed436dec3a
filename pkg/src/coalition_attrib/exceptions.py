"""Exception hierarchy. Each family maps onto one CLI exit code."""


class CoalitionAttribError(Exception):
    exit_code = 1


class ValidationError(CoalitionAttribError, ValueError):
    """Bad input: malformed files, invalid configuration, wrong shapes."""

    exit_code = 2


class SchemaError(ValidationError):
    """Column count or order does not match what a model was fitted on."""


class InsufficientDataError(ValidationError):
    pass


class SizeLimitError(ValidationError):
    """An exact enumeration was requested above its configured limit."""

    def __init__(self, what, size, limit, hint=None):
        msg = f"{what}: size {size} exceeds limit {limit}"
        if hint:
            msg = f"{msg}; {hint}"
        super().__init__(msg)
        self.size = size
        self.limit = limit


class NumericError(CoalitionAttribError, ArithmeticError):
    exit_code = 3


class RankDeficiencyError(NumericError):
    def __init__(self, column, message=None):
        super().__init__(message or f"design matrix is rank deficient at column {column!r}")
        self.column = column
