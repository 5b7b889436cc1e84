"""Exceptions raised by the reservoir topology toolkit."""
from typing import Any, Optional, Sequence, Tuple


class ReservoirTopologyError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class CalibrationError(ReservoirTopologyError, ValueError):
    """GL calibration bounds do not define a positive interval."""


class FieldKindError(ReservoirTopologyError, ValueError):
    """A scalar field carries the wrong kind of values for the requested operation."""


class GridParseError(ReservoirTopologyError, ValueError):
    """A grid file is malformed. `cell` is the 1-based (kx, ky, kz) triple when known."""

    def __init__(self, message: str, path: Any = None, cell: Optional[Tuple[int, int, int]] = None):
        self.path = path
        self.cell = cell
        details = message
        if cell is not None:
            details = f"{details} (cell kx={cell[0]}, ky={cell[1]}, kz={cell[2]})"
        if path is not None:
            details = f"{path}: {details}"
        super().__init__(details)


class DiagramParseError(ReservoirTopologyError, ValueError):
    """A persistence diagram file is not valid JSON or lacks the diagram fields."""

    def __init__(self, message: str, path: Any = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path is not None else message)


class DomainError(ReservoirTopologyError, ValueError):
    """Argument outside the mathematical domain of a function."""


class KrigingSolverError(ReservoirTopologyError):
    """The kriging system cannot be solved. `points` lists the offending positions."""

    def __init__(self, message: str, points: Sequence[Any] = ()):
        self.points = list(points)
        if self.points:
            message = f"{message}: {self.points}"
        super().__init__(message)


class SizeBudgetError(ReservoirTopologyError):
    """A computation would exceed the configured cell budget."""


class MetricError(ReservoirTopologyError, ValueError):
    """Two persistence diagrams cannot be compared."""


class ChainComplexError(ReservoirTopologyError):
    """Boundary matrices do not compose to zero."""
