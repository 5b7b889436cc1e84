"""Covariance models, kriging and sequential Gaussian simulation (SGS)."""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, KrigingSolverError
from .reservoir_grid import ScalarField
from .schemas import (
    ConditioningPoint,
    GridGeometry,
    KrigingMode,
    KrigingResult,
    MarginalTransform,
    SgsConfig,
    ValueKind,
    VariogramKind,
    VariogramModel,
)

logger = logging.getLogger(__name__)

# Conditioning alphas are clipped this far inside (0, 1) before the normal-score transform
_CDF_EPS = 1e-12


###########################
# Covariance functions
###########################

def covariance(model: VariogramModel, h):
    """C(h) = sill*exp(-h/R) (exponential) or sill*exp(-h^2/R^2) (gaussian)."""
    lag = np.asarray(h, dtype=float)
    if np.any(np.isnan(lag)) or np.any(lag < 0):
        raise DomainError(f"lag must be non-negative, got {h}")
    scaled = lag / model.range_m
    if model.kind == VariogramKind.EXPONENTIAL:
        c = model.sill * np.exp(-scaled)
    else:
        c = model.sill * np.exp(-scaled * scaled)
    return float(c) if c.ndim == 0 else c


def variogram(model: VariogramModel, h):
    """gamma(h) = C(0) - C(h)."""
    c = covariance(model, h)
    return model.sill - c


###########################
# Kriging
###########################

def _solve(model: VariogramModel, rel: np.ndarray, values: np.ndarray,
           mode: KrigingMode) -> Tuple[np.ndarray, float, float, Optional[float]]:
    """Kriging system with the target at the origin of `rel` (n, 3)."""
    n = values.size
    if n == 0:
        return np.zeros(0), model.mean, model.sill, None

    d0 = model.lag(rel)
    hit = np.flatnonzero(d0 == 0.0)
    if hit.size:
        weights = np.zeros(n)
        weights[hit[0]] = 1.0
        return weights, float(values[hit[0]]), 0.0, (0.0 if mode == KrigingMode.ORDINARY else None)

    c_mat = covariance(model, model.lag(rel[:, None, :] - rel[None, :, :]))
    c_vec = covariance(model, d0)

    try:
        if mode == KrigingMode.SIMPLE:
            weights = np.linalg.solve(c_mat, c_vec)
            estimate = model.mean + float(weights @ (values - model.mean))
            variance = model.sill - float(weights @ c_vec)
            return weights, estimate, min(max(variance, 0.0), model.sill), None

        lhs = np.ones((n + 1, n + 1))
        lhs[:n, :n] = c_mat
        lhs[n, n] = 0.0
        rhs = np.append(c_vec, 1.0)
        solution = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as e:
        raise KrigingSolverError(f"singular kriging matrix ({e})", points=[tuple(p) for p in rel]) from e

    weights, mu = solution[:n], float(solution[n])
    estimate = float(weights @ values)
    variance = model.sill - float(weights @ c_vec) - mu
    return weights, estimate, max(variance, 0.0), mu


def krige(model: VariogramModel, conditioning: Sequence[Tuple[Sequence[float], float]],
          target: Sequence[float], mode: KrigingMode = KrigingMode.ORDINARY) -> KrigingResult:
    """Estimate Z at `target` from (position, value) pairs.

    Ordinary mode imposes sum(lambda) = 1 through a Lagrange multiplier; simple
    mode uses the known mean of the model. With no conditioning data both modes
    return the model mean and C(0).
    """
    mode = KrigingMode(mode)
    positions = np.asarray([p for p, _ in conditioning], dtype=float).reshape(-1, 3)
    values = np.asarray([v for _, v in conditioning], dtype=float)
    target = np.asarray(target, dtype=float).reshape(3)

    if values.size > 1:
        gaps = model.lag(positions[:, None, :] - positions[None, :, :])
        i, j = np.nonzero(np.triu(gaps == 0.0, k=1))
        if i.size:
            raise KrigingSolverError(
                "duplicate conditioning positions",
                points=[(tuple(positions[a]), tuple(positions[b])) for a, b in zip(i, j)],
            )

    if values.size == 0 and mode == KrigingMode.ORDINARY:
        logger.debug("Ordinary kriging without data: returning the model mean")
    try:
        weights, estimate, variance, mu = _solve(model, positions - target, values, mode)
    except KrigingSolverError as e:
        raise KrigingSolverError("singular kriging matrix", points=[tuple(p) for p in positions]) from e
    return KrigingResult(weights=weights.tolist(), estimate=estimate, variance=variance, mode=mode, lagrange=mu)


###########################
# Sequential Gaussian simulation
###########################

@dataclass(frozen=True)
class SearchTemplate:
    """Grid offsets around a node, nearest first."""
    cells: np.ndarray    # (T, 3) integer offsets
    vectors: np.ndarray  # (T, 3) offsets in metres
    lags: np.ndarray     # (T,) anisotropic lag

    @property
    def pad(self) -> np.ndarray:
        if self.cells.size == 0:
            return np.zeros(3, dtype=int)
        return np.abs(self.cells).max(axis=0)


def search_template(geometry: GridGeometry, model: VariogramModel, radius: float,
                    max_nodes: int) -> SearchTemplate:
    """Nearest `max_nodes` offsets with lag <= radius, ties broken by (dz, dy, dx)."""
    spacing = np.asarray(geometry.spacings, dtype=float)
    anis = np.asarray(model.anisotropy, dtype=float)
    upper = np.asarray(geometry.shape) - 1

    def half_widths(r: float) -> np.ndarray:
        return np.minimum(np.floor(r * anis / spacing).astype(int), upper)

    # shrink the scanned box while it is much larger than the template
    reach = float(radius)
    limit = max(64 * max_nodes, 27)
    while np.prod(2 * half_widths(reach) + 1) > limit:
        reach *= 0.9

    hx, hy, hz = half_widths(reach)
    grid = np.stack(np.meshgrid(np.arange(-hx, hx + 1), np.arange(-hy, hy + 1),
                                np.arange(-hz, hz + 1), indexing="ij"), axis=-1).reshape(-1, 3)
    vectors = grid * spacing
    lags = model.lag(vectors)
    keep = (lags > 0.0) & (lags <= reach)
    grid, vectors, lags = grid[keep], vectors[keep], lags[keep]
    order = np.lexsort((grid[:, 0], grid[:, 1], grid[:, 2], lags))[:max_nodes]
    return SearchTemplate(cells=grid[order], vectors=vectors[order], lags=lags[order])


def _conditioning_cells(geometry: GridGeometry, conditioning: Iterable[ConditioningPoint]):
    points = list(conditioning)
    if not points:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    idx = np.array([(p.kx, p.ky, p.kz) for p in points], dtype=np.int64) - 1
    outside = np.any(idx >= np.asarray(geometry.shape), axis=1)
    if np.any(outside):
        bad = [tuple(int(v) + 1 for v in idx[i]) for i in np.flatnonzero(outside)]
        raise DomainError(f"conditioning cells outside the {geometry.shape} grid: {bad}")
    linear = geometry.linear_index(idx[:, 0], idx[:, 1], idx[:, 2]).astype(np.int64)
    uniq, counts = np.unique(linear, return_counts=True)
    if np.any(counts > 1):
        dup = [geometry.one_based(c) for c in uniq[counts > 1]]
        raise KrigingSolverError("duplicate conditioning cells", points=dup)
    return linear, np.array([p.value for p in points], dtype=float)


def multigrid_path(geometry: GridGeometry, cells: np.ndarray, levels: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Random visiting order of `cells` with coarse sub-lattices first.

    GSLIB multiple-grid search: a cell whose indices are all multiples of
    4 * (level + 1) has its random sort key lowered by level + 1, so the
    coarsest lattice is simulated first and each finer one is conditioned
    on the nodes already drawn at longer lags.
    """
    keys = rng.random(cells.size)
    if levels and cells.size:
        i, j, k = geometry.unravel(cells)
        for level in range(levels):
            stride = 4 * (level + 1)
            on_lattice = (i % stride == 0) & (j % stride == 0) & (k % stride == 0)
            keys[on_lattice] -= level + 1
    return cells[np.argsort(keys, kind="stable")]


def sgs_realize(geometry: GridGeometry, model: VariogramModel,
                conditioning: Iterable[ConditioningPoint] = (),
                config: Optional[SgsConfig] = None) -> ScalarField:
    """One SGS realization.

    Unconditioned cells are visited along a seeded multiple-grid random path
    (`multigrid_path`). Each one is kriged from the nearest known nodes
    (conditioning data and previously simulated cells) and drawn from
    N(Z*, sigma^2). With the gaussian_cdf transform the walk runs in
    standard-normal space and the output is alpha = Phi(z); conditioning
    cells keep their input values exactly.
    """
    config = config or SgsConfig(seed=0)
    gaussian = config.marginal_transform == MarginalTransform.GAUSSIAN_CDF
    sim_model = model.model_copy(update={"sill": 1.0, "mean": 0.0}) if gaussian else model

    cond_lin, cond_vals = _conditioning_cells(geometry, conditioning)
    nx, ny, nz = geometry.shape
    n = geometry.n_cells

    template = search_template(geometry, sim_model, config.resolved_radius(model), config.template_nodes)
    px, py, pz = (int(v) for v in template.pad)
    big_x, big_y = nx + 2 * px, ny + 2 * py
    padded_size = big_x * big_y * (nz + 2 * pz)
    offsets = template.cells[:, 0] + big_x * (template.cells[:, 1] + big_y * template.cells[:, 2])

    i, j, k = geometry.unravel(np.arange(n))
    padded_of = (i + px) + big_x * ((j + py) + big_y * (k + pz))

    known = np.zeros(padded_size, dtype=bool)
    values = np.zeros(padded_size)
    if cond_lin.size:
        start = ndtri(np.clip(cond_vals, _CDF_EPS, 1.0 - _CDF_EPS)) if gaussian else cond_vals
        known[padded_of[cond_lin]] = True
        values[padded_of[cond_lin]] = start

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    unconditioned = np.setdiff1d(np.arange(n), cond_lin, assume_unique=True)
    path = multigrid_path(geometry, unconditioned, config.multigrid_levels, rng)
    noise = rng.standard_normal(path.size)

    logger.info(f"SGS seed={config.seed}: {path.size} cells to simulate, "
                f"{cond_lin.size} conditioning, template of {offsets.size} nodes")
    report_every = max(path.size // 10, 1)
    max_points = config.max_points
    mode = config.kriging_mode
    for step, cell in enumerate(path):
        base = padded_of[cell]
        candidates = base + offsets
        hits = np.flatnonzero(known[candidates])[:max_points]
        _, estimate, variance, _ = _solve(sim_model, template.vectors[hits], values[candidates[hits]], mode)
        values[base] = estimate + math.sqrt(variance) * noise[step]
        known[base] = True
        if (step + 1) % report_every == 0:
            logger.debug(f"SGS seed={config.seed}: {step + 1}/{path.size} cells")

    out = values.reshape((big_x, big_y, nz + 2 * pz), order="F")[px:px + nx, py:py + ny, pz:pz + nz]
    out = np.array(out)
    if gaussian:
        out = ndtr(out)
    if cond_lin.size:
        ci, cj, ck = geometry.unravel(cond_lin)
        out[ci, cj, ck] = cond_vals
    kind = ValueKind.ALPHA if gaussian else ValueKind.Z_VALUE
    return ScalarField(geometry, out, kind)


def empirical_variogram(field: ScalarField, max_lag: int, axes: Sequence[int] = (0, 1, 2)) -> np.ndarray:
    """Axis-aligned semivariogram, shape (len(axes), max_lag); row a, column h-1 is gamma at h cells."""
    values = field.values
    gamma = np.full((len(axes), max_lag), np.nan)
    for row, axis in enumerate(axes):
        for h in range(1, max_lag + 1):
            if h >= values.shape[axis]:
                break
            head = np.take(values, np.arange(h, values.shape[axis]), axis=axis)
            tail = np.take(values, np.arange(0, values.shape[axis] - h), axis=axis)
            gamma[row, h - 1] = 0.5 * np.mean((head - tail) ** 2)
    return gamma
