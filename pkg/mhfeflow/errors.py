"""Exception hierarchy for mhfeflow.

Solver non-convergence is reported through flagged results, never through these exceptions;
they are reserved for invalid input, broken geometry, and states the simulator cannot recover
from.
"""

from __future__ import annotations


class MhfeflowError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(MhfeflowError, ValueError):
    """Raised when a caller passes out-of-range sizes, indices or dimensions."""


class GeometryError(MhfeflowError):
    """Raised for degenerate cells (non-positive volume, singular mapping)."""

    def __init__(self, message: str, cell: int | None = None) -> None:
        super().__init__(message)
        self.cell = cell


class ConstitutiveError(MhfeflowError):
    """Raised when a constitutive law leaves its physical range (e.g. porosity <= 0)."""


class DiscretizationError(MhfeflowError):
    """Raised when a discrete operator cannot be formed (degenerate cell pair)."""


class SingularMatrixError(MhfeflowError, ArithmeticError):
    """Raised by dense factorizations that meet a zero pivot column."""


class PreconditionerBuildError(MhfeflowError):
    """Raised when a preconditioner cannot be built, e.g. zero diagonal entry."""

    def __init__(self, message: str, row: int | None = None) -> None:
        super().__init__(message)
        self.row = row


class NumericError(MhfeflowError, ArithmeticError):
    """Raised when NaN or Inf shows up inside an iterative method."""

    def __init__(self, message: str, stage: str | None = None) -> None:
        super().__init__(message)
        self.stage = stage


class ConfigError(MhfeflowError, ValueError):
    """Raised for invalid run configurations; ``line`` points into the config file."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message)
        self.line = line


class IngestionError(MhfeflowError, ValueError):
    """Raised when a property file cannot be read; ``position`` is the 0-based token index."""

    def __init__(self, message: str, position: int | None = None) -> None:
        super().__init__(message)
        self.position = position


class SimulationError(MhfeflowError):
    """Raised when the time-step driver gives up (too many consecutive cuts)."""
