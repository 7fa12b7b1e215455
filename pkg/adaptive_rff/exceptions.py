"""Custom exceptions for the adaptive-rff package."""


class ArffError(Exception):
    """Base exception for adaptive-rff errors."""

    pass


class ArffValidationError(ArffError):
    """Exception raised when inputs are rejected before any computation."""

    pass


class ArffConfigError(ArffValidationError):
    """Exception raised for invalid configuration files or keys."""

    def __init__(
        self, message: str, key: str | None = None, suggestion: str | None = None
    ):
        self.key = key
        self.suggestion = suggestion
        super().__init__(message)


class ArffSolverError(ArffError):
    """Exception raised when a numerical solver fails."""

    def __init__(
        self,
        message: str,
        iterations: int | None = None,
        residual: float | None = None,
    ):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class ArffConvergenceError(ArffSolverError):
    """Exception raised when an iterative solver misses its tolerance."""

    pass


class ArffFactorizationError(ArffSolverError):
    """Exception raised when a matrix factorization fails."""

    pass


class ArffTrainingError(ArffSolverError):
    """Exception raised when a solve fails inside a resampling run."""

    def __init__(
        self,
        message: str,
        iteration: int,
        iterations: int | None = None,
        residual: float | None = None,
    ):
        self.iteration = iteration
        super().__init__(message, iterations=iterations, residual=residual)


class EmptyCutoffError(ArffError):
    """Exception raised when no amplitude survives the cutoff."""

    pass


class SupportError(ArffError):
    """Exception raised when a distribution misses a nonzero coefficient."""

    pass


class OracleGuardError(ArffValidationError):
    """Exception raised when an oracle computation would be too large."""

    pass


class ZeroSignalError(ArffError):
    """Exception raised when a ratio has an all-zero denominator."""

    pass


class IdxFormatError(ArffError):
    """Base exception for malformed IDX streams."""

    pass


class IdxMagicError(IdxFormatError):
    """Exception raised when an IDX header carries the wrong magic number."""

    def __init__(self, message: str, magic: int | None = None):
        self.magic = magic
        super().__init__(message)


class IdxTruncatedError(IdxFormatError):
    """Exception raised when an IDX stream ends early."""

    pass


class IdxCountMismatchError(IdxFormatError):
    """Exception raised when the payload length disagrees with the header."""

    pass
