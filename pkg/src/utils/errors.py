"""
Exception hierarchy for the base-station geometry toolkit.
Each top-level class carries the CLI exit code it maps to.
"""
from typing import Any, Dict, List, Optional, Sequence


class CellGeoError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1


class ConfigError(CellGeoError, ValueError):
    """Invalid parameters or configuration (exit code 2)."""

    exit_code = 2


class DataError(CellGeoError, ValueError):
    """Input data that cannot be used as given (exit code 3)."""

    exit_code = 3


class NumericalError(CellGeoError, RuntimeError):
    """A numerical procedure failed (exit code 4)."""

    exit_code = 4


class DegenerateWindowError(DataError):
    """Window with zero width or height."""


class UnsupportedFamilyError(ConfigError):
    """Operation requested for a process family that does not support it."""


class GridMismatchError(ConfigError):
    """Observed curve and envelope are evaluated on different grids."""


class SingularPathLossError(DataError):
    """User located exactly on a base station."""


class InfeasibleFitError(NumericalError):
    """No admissible parameter value exists for the data (e.g. hard-core violated)."""

    def __init__(self, message: str, failures: Optional[Dict[str, str]] = None):
        super().__init__(message)
        self.failures = failures or {}


class ConvergenceError(NumericalError):
    """Optimizer ran out of budget; carries the last iterate."""

    def __init__(self, message: str, last_iterate: Any = None):
        super().__init__(message)
        self.last_iterate = last_iterate


class EnvelopeError(NumericalError):
    """Statistic undefined too often across simulations."""

    def __init__(self, message: str, grid_points: Sequence[float] = ()):
        super().__init__(message)
        self.grid_points = list(grid_points)


class IngestError(DataError):
    """Malformed input file; carries the offending line numbers."""

    def __init__(self, message: str, line_numbers: Optional[List[int]] = None):
        super().__init__(message)
        self.line_numbers = line_numbers or []


class StageError(CellGeoError):
    """Pipeline stage failure, tagged with the stage name."""

    def __init__(self, stage: str, cause: CellGeoError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
