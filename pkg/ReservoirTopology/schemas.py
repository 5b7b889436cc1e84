from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    field_validator,
    model_validator,
)

from . import config


# --- Enumerations ---

class ValueKind(str, Enum):
    RAW_GL = "raw_gl"
    Z_VALUE = "z_value"
    ALPHA = "alpha"


class ClampPolicy(str, Enum):
    CLAMP = "clamp"
    KEEP = "keep"


class VariogramKind(str, Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"


class KrigingMode(str, Enum):
    ORDINARY = "ordinary"
    SIMPLE = "simple"


class MarginalTransform(str, Enum):
    GAUSSIAN_CDF = "gaussian_cdf"
    NONE = "none"


# --- Grid geometry ---

class GridGeometry(BaseModel):
    """Axis-aligned box split into nx*ny*nz elementary cubes.

    Cell indices are 0-based inside the code; files and messages use the
    1-based (kx, ky, kz) triples. Linear order is x-fastest, then y, then z.
    """
    model_config = ConfigDict(frozen=True)

    origin: Tuple[float, float, float] = Field(default=(0.0, 0.0, 0.0), description="(x0, y0, z0) in metres")
    counts: Tuple[PositiveInt, PositiveInt, PositiveInt] = Field(description="(N_x, N_y, N_z)")
    spacings: Tuple[PositiveFloat, PositiveFloat, PositiveFloat] = Field(
        default=(1.0, 1.0, 1.0), description="(dx, dy, dz) in metres"
    )

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(int(n) for n in self.counts)

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacings
        return dx * dy * dz

    @property
    def extent(self) -> Tuple[float, float, float]:
        return tuple(n * d for n, d in zip(self.counts, self.spacings))

    def linear_index(self, i, j, k):
        nx, ny, _ = self.shape
        return np.asarray(i) + nx * (np.asarray(j) + ny * np.asarray(k))

    def unravel(self, linear):
        nx, ny, _ = self.shape
        linear = np.asarray(linear)
        return linear % nx, (linear // nx) % ny, linear // (nx * ny)

    def one_based(self, linear: int) -> Tuple[int, int, int]:
        i, j, k = self.unravel(int(linear))
        return int(i) + 1, int(j) + 1, int(k) + 1

    def cell_centers(self) -> np.ndarray:
        """Centres of every cell in linear order, shape (n_cells, 3), metres."""
        i, j, k = self.unravel(np.arange(self.n_cells))
        idx = np.stack([i, j, k], axis=1).astype(float)
        return np.asarray(self.origin) + (idx + 0.5) * np.asarray(self.spacings)

    def to_header(self) -> Dict[str, float]:
        (nx, ny, nz), (dx, dy, dz), (x0, y0, z0) = self.counts, self.spacings, self.origin
        return {"nx": nx, "ny": ny, "nz": nz, "dx": dx, "dy": dy, "dz": dz, "x0": x0, "y0": y0, "z0": z0}

    @classmethod
    def from_header(cls, header: Dict[str, Any]) -> "GridGeometry":
        return cls(
            counts=(header["nx"], header["ny"], header["nz"]),
            spacings=(header["dx"], header["dy"], header["dz"]),
            origin=(header.get("x0", 0.0), header.get("y0", 0.0), header.get("z0", 0.0)),
        )


# --- Geostatistics ---

class VariogramModel(BaseModel):
    """Stationary covariance model; `range_m` is the variogram radius R."""
    model_config = ConfigDict(frozen=True)

    kind: VariogramKind = Field(description="exponential or gaussian")
    range_m: PositiveFloat = Field(description="Variogram radius R in metres")
    sill: PositiveFloat = Field(default=1.0, description="C(0)")
    mean: float = Field(default=0.0, description="Known mean m (simple kriging)")
    anisotropy: Tuple[PositiveFloat, PositiveFloat, PositiveFloat] = Field(
        default=(1.0, 1.0, 1.0), description="Per-axis range multipliers"
    )

    def lag(self, delta: np.ndarray) -> np.ndarray:
        """Lag length of displacement vectors (..., 3) after anisotropic scaling."""
        scaled = np.asarray(delta, dtype=float) / np.asarray(self.anisotropy)
        return np.sqrt(np.sum(scaled * scaled, axis=-1))


class KrigingResult(BaseModel):
    weights: List[float] = Field(description="lambda_i per conditioning point")
    estimate: float = Field(description="Z*")
    variance: float = Field(ge=0.0, description="Kriging variance sigma^2")
    mode: KrigingMode
    lagrange: Optional[float] = Field(default=None, description="Multiplier of the sum-to-one constraint")


class SgsConfig(BaseModel):
    seed: int = Field(ge=0, lt=2 ** 64, description="Seed of the realization")
    max_points: PositiveInt = Field(default=16, description="Neighbourhood size")
    search_radius: Optional[PositiveFloat] = Field(default=None, description="Defaults to 2R")
    marginal_transform: MarginalTransform = MarginalTransform.GAUSSIAN_CDF
    kriging_mode: KrigingMode = KrigingMode.SIMPLE
    template_nodes: PositiveInt = Field(
        default_factory=lambda: config.RESERVOIR_TOPO_TEMPLATE_NODES,
        description="Nearest grid offsets scanned when searching simulated nodes",
    )
    multigrid_levels: NonNegativeInt = Field(
        default_factory=lambda: max(config.RESERVOIR_TOPO_MULTIGRID_LEVELS, 0),
        description="Coarse sub-lattices (strides 4, 8, 12, ...) simulated before the remaining cells",
    )

    def resolved_radius(self, model: VariogramModel) -> float:
        if self.search_radius is not None:
            return float(self.search_radius)
        return 2.0 * model.range_m


class ConditioningPoint(BaseModel):
    kx: PositiveInt
    ky: PositiveInt
    kz: PositiveInt
    value: float

    @field_validator("value")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("conditioning value must be finite")
        return v


# --- Topology ---

class BettiSummary(BaseModel):
    alpha: Optional[float] = None
    b0: NonNegativeInt
    b1: NonNegativeInt
    b2: NonNegativeInt
    chi: int
    volume: float = Field(ge=0.0, description="Filled-cell count, or physical volume when requested")
    weighted: Tuple[float, float, float]

    @model_validator(mode="after")
    def _consistent(self) -> "BettiSummary":
        if self.chi != self.b0 - self.b1 + self.b2:
            raise ValueError(f"chi={self.chi} differs from b0-b1+b2={self.b0 - self.b1 + self.b2}")
        if self.volume == 0 and (self.b0, self.b1, self.b2, self.chi) != (0, 0, 0, 0):
            raise ValueError("empty set must have zero Betti numbers")
        return self


# --- Provenance ---

TOOL_VERSION = config.TOOL_VERSION


class RunManifest(BaseModel):
    command: str
    argv: List[str]
    config: Dict[str, Any] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    tool_version: str = TOOL_VERSION
    timings: Dict[str, float] = Field(default_factory=dict)
    created_at: str
