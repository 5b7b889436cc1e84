"""Scalar fields on a reservoir grid, GL normalization and excursion sets."""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import CalibrationError, FieldKindError
from .schemas import ClampPolicy, GridGeometry, ValueKind

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScalarField:
    """One value per elementary cube, stored as an (nx, ny, nz) array."""
    geometry: GridGeometry
    values: np.ndarray
    value_kind: ValueKind = ValueKind.ALPHA

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and values.size == self.geometry.n_cells:
            values = values.reshape(self.geometry.shape, order="F")
        if values.shape != self.geometry.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.geometry.shape}")
        object.__setattr__(self, "values", _frozen(values, float))
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))

    def flat(self) -> np.ndarray:
        """Values in storage order (x-fastest)."""
        return self.values.ravel(order="F")


@dataclass(frozen=True)
class CellSet:
    """A subset of the elementary cubes of a grid."""
    geometry: GridGeometry
    membership: np.ndarray
    threshold: Optional[float] = None

    def __post_init__(self):
        mask = np.asarray(self.membership, dtype=bool)
        if mask.shape != self.geometry.shape:
            raise ValueError(f"membership shape {mask.shape} does not match grid {self.geometry.shape}")
        object.__setattr__(self, "membership", _frozen(mask, bool))

    @property
    def volume(self) -> int:
        return int(np.count_nonzero(self.membership))

    @property
    def physical_volume(self) -> float:
        return self.volume * self.geometry.cell_volume

    def issubset(self, other: "CellSet") -> bool:
        return bool(np.all(~self.membership | other.membership))


class OutOfRange(NamedTuple):
    below: int
    above: int

    @property
    def total(self) -> int:
        return self.below + self.above


def normalize_gl(field: ScalarField, gl_min: float, gl_max: float,
                 clamp: ClampPolicy = ClampPolicy.CLAMP):
    """Double-difference parameter alpha = (GL - GL_min) / (GL_max - GL_min).

    Returns the alpha field and the number of cells that fell outside [0, 1)
    before the clamp policy was applied.
    """
    if field.value_kind != ValueKind.RAW_GL:
        raise FieldKindError(f"normalize_gl expects a raw_gl field, got {field.value_kind.value}")
    if not gl_max > gl_min:
        raise CalibrationError(f"GL_max ({gl_max}) must exceed GL_min ({gl_min})")

    alpha = (field.values - gl_min) / (gl_max - gl_min)
    counts = OutOfRange(below=int(np.count_nonzero(alpha < 0.0)),
                        above=int(np.count_nonzero(alpha >= 1.0)))
    if counts.total:
        logger.info(f"{counts.below} cells below GL_min and {counts.above} at or above GL_max")
    if ClampPolicy(clamp) == ClampPolicy.CLAMP:
        alpha = np.clip(alpha, 0.0, 1.0)
    return ScalarField(field.geometry, alpha, ValueKind.ALPHA), counts


def excursion_set(field: ScalarField, alpha0: float) -> CellSet:
    """Cells whose alpha does not exceed alpha0."""
    if field.value_kind != ValueKind.ALPHA:
        raise FieldKindError(f"excursion sets are taken on alpha fields, got {field.value_kind.value}")
    return CellSet(field.geometry, field.values <= alpha0, threshold=float(alpha0))
