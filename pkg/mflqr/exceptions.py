from enum import StrEnum


class ShapeErrorMsg(StrEnum):
    DIMENSION_MISMATCH = "Matrix dimensions are not compatible."
    REPLICATION_MISMATCH = "Pseudo-block operands have different replication counts."
    REPLICATION_COUNT = "Replication count k must be a positive integer."
    NOT_SQUARE = "Matrix must be square."
    BLOCK_COUNT = "Stacked vector does not split into k blocks of the expected size."
    EMPTY_STACK = "Cannot take the mean field of an empty stack."
    NOT_MATRIX = "Expected a two dimensional array."


class LinAlgErrorMsg(StrEnum):
    SINGULAR_INNER = "Inner block M is singular or ill conditioned."
    SINGULAR_MEAN = "Mean block M̄ is singular or ill conditioned."
    FACTORIZATION = "Could not factor R + BᵀSB; it should be positive definite."


class ModelErrorMsg(StrEnum):
    EMPTY_SUPPORT = "Disturbance support must contain at least one point."
    SUPPORT_DIMENSION = "Disturbance support points must share a dimension."
    NEGATIVE_PROBABILITY = "Disturbance probabilities must be nonnegative."
    PROBABILITY_SUM = "Disturbance probabilities must sum to 1."
    NOT_SYMMETRIC = "Matrix must be symmetric."
    NOT_PSD = "Matrix must be positive semidefinite."
    NOT_PD = "Matrix must be positive definite."
    NEGATIVE_LAMBDA = "Risk parameter must be nonnegative."
    HORIZON = "Horizon T must be a positive integer."
    TIME_OUT_OF_RANGE = "Time index is outside the control horizon."
    SAMPLES = "Not enough Monte Carlo samples."


class ConfigErrorMsg(StrEnum):
    SYNTAX = "Config file is not valid TOML."
    MISSING_KEY = "Missing required key."
    MALFORMED_NUMBER = "Malformed number."
    INVALID_VALUE = "Invalid value."
    UNKNOWN_KEY = "Unknown key."


class MfLqrException(Exception):
    ERRORS: type[StrEnum]

    def __init__(self, type_, detail: str | None = None):
        self.type = type_
        if isinstance(type_, self.ERRORS):
            self.message = type_.value
        else:
            self.message = "Unknown error."
        self.detail = detail

    def __str__(self):
        if self.detail:
            return f"{self.message} {self.detail}"
        return self.message


class ShapeException(MfLqrException):
    """
    Exception class for operand shape errors.
    """

    ERRORS = ShapeErrorMsg


class SingularMatrixException(MfLqrException):
    """
    Raised when a pseudo-block factor cannot be inverted. The message names the failing factor.
    """

    ERRORS = LinAlgErrorMsg


class NumericalException(MfLqrException):
    """
    Raised when a Riccati step fails to factor its gain matrix.
    """

    ERRORS = LinAlgErrorMsg


class ModelException(MfLqrException):
    """
    Exception class for invalid problem data: disturbances, cost matrices, risk parameter or time indices.
    """

    ERRORS = ModelErrorMsg


class ConfigException(MfLqrException):
    """
    Exception class for experiment config errors. Names the offending key and, when known, its line.
    """

    ERRORS = ConfigErrorMsg

    def __init__(self, type_, key: str | None = None, line: int | None = None, detail: str | None = None):
        super().__init__(type_, detail)
        self.key = key
        self.line = line

    def __str__(self):
        where = ""
        if self.key is not None:
            where += f" key '{self.key}'"
        if self.line is not None:
            where += f" (line {self.line})"
        text = self.message + where
        if self.detail:
            text += f": {self.detail}"
        return text
