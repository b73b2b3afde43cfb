"""
Exceptions
----------
Error hierarchy for cdzsl.

Every error carries the CLI exit code it maps to:
- 1: usage errors (bad flags, bad config keys, invalid K)
- 2: data errors (files, dimensions, manifests, infeasible queries)
- 3: solver errors (non-convergence when treated as fatal, divergence, singular systems)
"""


class CdzslError(Exception):
    """Base class for all cdzsl errors."""

    exit_code: int = 2


# ---------- USAGE ----------


class ConfigError(CdzslError):
    """Malformed or unknown configuration key, or an invalid value."""

    exit_code = 1


class InvalidK(CdzslError):
    """Requested ranking depth K is outside 1..M."""

    exit_code = 1


# ---------- DATA ----------


class DataError(CdzslError):
    """Input data is missing, malformed or inconsistent."""

    exit_code = 2


class DimensionMismatch(DataError):
    """Operand shapes do not agree."""


class LengthMismatch(DataError):
    """Parallel sequences have different lengths."""


class ManifestError(DataError):
    """A dataset manifest is missing keys, files, or fails cross-validation."""


class InvalidGraph(DataError):
    """Graph construction parameters are inconsistent with the node set."""


class MatrixFormatError(DataError):
    """A matrix file cannot be decoded."""


class BadMagic(MatrixFormatError):
    """The container does not start with the `CDZM` magic."""


class UnsupportedFormat(MatrixFormatError):
    """Unknown container version or dtype tag."""


class TruncatedPayload(MatrixFormatError):
    """The payload is shorter than rows x cols x 8 bytes."""


class TrailingPayload(MatrixFormatError):
    """The payload is longer than rows x cols x 8 bytes."""


class DimensionOverflow(MatrixFormatError):
    """Matrix dimensions do not fit the container header or memory limits."""


class NonFiniteValue(MatrixFormatError):
    """A matrix entry is NaN or infinite."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class Infeasible(CdzslError):
    """No sample count satisfies the requested bound."""

    exit_code = 2


class RejectionBudgetExceeded(CdzslError):
    """Rejection sampling could not meet the separation constraint."""

    exit_code = 2


# ---------- SOLVER ----------


class SolverError(CdzslError):
    """An optimization routine failed."""

    exit_code = 3


class NonConvergence(SolverError):
    """A solver did not meet its tolerance within the iteration budget."""


class StepDivergence(SolverError):
    """A dictionary step increased the objective beyond the allowed slack."""


class SingularSystem(SolverError):
    """A linear system could not be factorized."""


# ---------- PIPELINE ----------


class StageError(CdzslError):
    """
    Wraps a failure raised inside a named pipeline stage.

    Attributes:
        stage (str): Stage name (load, train, predict, classify, report).
        cause (Exception): The original error.
    """

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
