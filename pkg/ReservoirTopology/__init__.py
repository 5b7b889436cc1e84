# ReservoirTopology package
from .reservoir_grid import CellSet, ScalarField, excursion_set, normalize_gl
from .schemas import BettiSummary, GridGeometry, SgsConfig, VariogramModel

__all__ = [
    "BettiSummary",
    "CellSet",
    "GridGeometry",
    "ScalarField",
    "SgsConfig",
    "VariogramModel",
    "excursion_set",
    "normalize_gl",
]
