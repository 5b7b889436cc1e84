"""Excursion filtrations, persistence diagrams and the bottleneck distance."""
import json
import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations, product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import config
from .errors import DiagramParseError, DomainError, FieldKindError, MetricError, SizeBudgetError
from .grid_io import write_json
from .parallel import parallel_map
from .reservoir_grid import CellSet, ScalarField, excursion_set
from .schemas import ValueKind

logger = logging.getLogger(__name__)


class PlaneNorm(str, Enum):
    L1 = "l1"
    LINF = "linf"


# --- Filtration ---

@dataclass(frozen=True)
class Filtration:
    """Nested excursion sets of an alpha field at strictly increasing thresholds."""
    field: ScalarField
    thresholds: np.ndarray

    def __post_init__(self):
        if self.field.value_kind != ValueKind.ALPHA:
            raise FieldKindError(f"filtrations are built on alpha fields, got {self.field.value_kind.value}")
        thresholds = np.array(self.thresholds, dtype=float)
        if thresholds.ndim != 1 or np.any(np.diff(thresholds) <= 0):
            raise ValueError("thresholds must be a strictly increasing 1-D sequence")
        thresholds.setflags(write=False)
        object.__setattr__(self, "thresholds", thresholds)

    @classmethod
    def from_field(cls, field: ScalarField, step: Optional[float] = None,
                   low: float = 0.0, high: float = 1.0) -> "Filtration":
        """Fixed grid low, low+step, ..., high (the default cross-reservoir grid)."""
        step = config.RESERVOIR_TOPO_STEP if step is None else step
        if not step > 0:
            raise DomainError(f"step must be positive, got {step}")
        count = int(round((high - low) / step))
        return cls(field, np.round(low + np.arange(count + 1) * step, 10))

    @classmethod
    def from_values(cls, field: ScalarField) -> "Filtration":
        """One threshold per distinct field value."""
        return cls(field, np.unique(field.values))

    def __len__(self) -> int:
        return self.thresholds.size

    def levels(self) -> np.ndarray:
        """Index of the first threshold admitting each cell; len(self) for cells never admitted."""
        return np.searchsorted(self.thresholds, self.field.values, side="left")

    def cell_set(self, index: int) -> CellSet:
        return excursion_set(self.field, float(self.thresholds[index]))


# --- Diagrams ---

@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite (birth, death) points plus births of essential classes (death = infinity)."""
    q: int
    points: np.ndarray
    essential: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        essential = np.sort(np.array(self.essential, dtype=float).reshape(-1))
        if points.size and np.any(points[:, 0] >= points[:, 1]):
            raise ValueError("every diagram point needs birth < death")
        order = np.lexsort((points[:, 1], points[:, 0])) if points.size else np.zeros(0, dtype=int)
        points = points[order]
        points.setflags(write=False)
        essential.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "essential", essential)

    def __len__(self) -> int:
        return self.points.shape[0] + self.essential.size

    def alive_count(self, alpha: float) -> int:
        """Classes alive at alpha: birth <= alpha < death."""
        finite = np.count_nonzero((self.points[:, 0] <= alpha) & (alpha < self.points[:, 1]))
        return int(finite + np.count_nonzero(self.essential <= alpha))

    def betti_curve(self, thresholds: Sequence[float]) -> np.ndarray:
        return np.array([self.alive_count(a) for a in thresholds], dtype=np.int64)

    def same_multiset(self, other: "PersistenceDiagram") -> bool:
        return (self.q == other.q and self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points) and np.array_equal(self.essential, other.essential))

    def to_json(self) -> Dict:
        return {"q": self.q, "points": self.points.tolist(), "essential": self.essential.tolist()}

    @classmethod
    def from_json(cls, payload: Dict) -> "PersistenceDiagram":
        return cls(q=int(payload["q"]), points=payload.get("points", []), essential=payload.get("essential", []))


def write_diagram(diagram: PersistenceDiagram, path: Union[str, Path]) -> Path:
    return write_json(path, diagram.to_json())


def read_diagram(path: Union[str, Path]) -> PersistenceDiagram:
    with open(path, "r") as f:
        try:
            return PersistenceDiagram.from_json(json.load(f))
        except (KeyError, TypeError, ValueError) as e:
            logger.error(f"Could not parse diagram {path}: {e}")
            raise DiagramParseError(str(e), path=path) from e


def _diagram(q: int, thresholds: np.ndarray, pairs: List[Tuple[int, int]], essential: List[int]) -> PersistenceDiagram:
    points = [(thresholds[b], thresholds[d]) for b, d in pairs]
    return PersistenceDiagram(q=q, points=points, essential=[thresholds[b] for b in essential])


# --- q = 0 by union-find ---

def persistence_q0(filtration: Filtration) -> PersistenceDiagram:
    """Components of the excursion filtration; on a merge the younger component dies.

    Cells admitted at the same threshold are processed in lexicographic (i, j, k)
    order, and equal births are resolved in favour of the component whose first
    cell was processed earlier.
    """
    shape = filtration.field.geometry.shape
    levels = filtration.levels().ravel()  # C order: lexicographic in (i, j, k)
    n_levels = len(filtration)
    admitted = np.flatnonzero(levels < n_levels)
    order = admitted[np.argsort(levels[admitted], kind="stable")]

    strides = (shape[1] * shape[2], shape[2], 1)
    coords = np.stack(np.unravel_index(np.arange(levels.size), shape), axis=1)

    ds = DisjointSet()
    entered = np.zeros(levels.size, dtype=bool)
    elder: Dict[int, Tuple[int, int]] = {}  # root -> (birth level, position in processing order)
    pairs: List[Tuple[int, int]] = []

    for position, cell in enumerate(order.tolist()):
        level = int(levels[cell])
        ds.add(cell)
        elder[cell] = (level, position)
        entered[cell] = True
        for axis in range(3):
            for sign in (-1, 1):
                nb_coord = coords[cell, axis] + sign
                if nb_coord < 0 or nb_coord >= shape[axis]:
                    continue
                nb = cell + sign * strides[axis]
                if not entered[nb]:
                    continue
                ra, rb = ds[cell], ds[nb]
                if ra == rb:
                    continue
                old, young = (ra, rb) if elder[ra] < elder[rb] else (rb, ra)
                if elder[young][0] < level:
                    pairs.append((elder[young][0], level))
                keep = elder[old]
                ds.merge(ra, rb)
                root = ds[ra]
                elder.pop(young, None)
                elder.pop(old, None)
                elder[root] = keep

    essential = sorted(elder[root][0] for root in {ds[c] for c in order.tolist()}) if order.size else []
    logger.debug(f"q=0 persistence: {len(pairs)} finite pairs, {len(essential)} essential classes")
    return _diagram(0, filtration.thresholds, pairs, essential)


# --- All q by boundary-matrix reduction ---
#
# A lattice cell c (vertex, edge, face or cube of the grid) is written in doubled
# coordinates: odd along the axes it spans, even along the others. The cubes
# containing c sit at positions e in {0,1} along the even axes, and the copies of
# c carried by those cubes are glued by the identification complex K_c: cubes as
# vertices, face-adjacent pairs as edges, complete 2x2 squares, and inside a
# 2x2x2 block the hexagons left by removing an antipodal pair and the 3-cells
# left by removing one cube. Every component of K_c has trivial H1 and H2, and
# the product cells c x sigma form a complex homotopy equivalent to the
# unstacked complex. A cell enters when all cubes of sigma are present, so the
# complexes are nested along the filtration.

_BITS = (1, 2, 4)


def _local_cells(even_axes: Tuple[int, ...]):
    """Cells of K_c for a lattice cell whose even axes are `even_axes`.

    Returns (positions, dimension, boundary) triples; positions are bitmasks
    (bit `1 << axis` set when the cube sits on the upper side along that axis)
    and boundaries index earlier entries.
    """
    free = [_BITS[a] for a in even_axes]
    positions = sorted({sum(b for b, keep in zip(free, mask) if keep)
                        for mask in product((0, 1), repeat=len(free))})
    cells: List[Tuple[frozenset, int, List[int]]] = []
    index: Dict[frozenset, int] = {}

    def add(members, dim, boundary):
        key = frozenset(members)
        index[key] = len(cells)
        cells.append((key, dim, boundary))

    def adjacent_pairs(members):
        return [index[frozenset((p, q))] for p, q in combinations(sorted(members), 2)
                if bin(p ^ q).count("1") == 1]

    for p in positions:
        add([p], 0, [])
    for p, q in combinations(positions, 2):
        if bin(p ^ q).count("1") == 1:
            add([p, q], 1, [index[frozenset([p])], index[frozenset([q])]])
    squares = []
    for a, b in combinations(free, 2):
        rest = [bit for bit in free if bit not in (a, b)]
        for fixed in product((0, 1), repeat=len(rest)):
            base = sum(bit for bit, keep in zip(rest, fixed) if keep)
            members = [base, base | a, base | b, base | a | b]
            squares.append(frozenset(members))
            add(members, 2, adjacent_pairs(members))
    if len(free) == 3:
        for p in range(4):
            members = [q for q in range(8) if q not in (p, p ^ 7)]
            add(members, 2, adjacent_pairs(members))
        for p in range(8):
            members = frozenset(q for q in range(8) if q != p ^ 7)
            hexagon = index[frozenset(q for q in range(8) if q not in (p, p ^ 7))]
            add(members, 3, [hexagon] + [index[s] for s in squares if s <= members])
    return cells


_PATTERNS = list(product((0, 1), repeat=3))  # 1 marks an odd (spanned) axis
_TEMPLATES = {pat: _local_cells(tuple(a for a in range(3) if not pat[a])) for pat in _PATTERNS}
_TEMPLATE_INDEX = {pat: {cell[0]: t for t, cell in enumerate(cells)} for pat, cells in _TEMPLATES.items()}


def _pattern_shape(pattern, shape):
    return tuple(n if odd else n + 1 for odd, n in zip(pattern, shape))


def _cell_levels(padded: np.ndarray, pattern, members, grid) -> np.ndarray:
    """Entry level of c x sigma for every lattice cell of one pattern: latest of its cubes."""
    out = None
    for p in members:
        start = [1 if pattern[a] else (p >> a) & 1 for a in range(3)]
        window = padded[start[0]:start[0] + grid[0], start[1]:start[1] + grid[1], start[2]:start[2] + grid[2]]
        out = window if out is None else np.maximum(out, window)
    return out


def _realization(levels: np.ndarray, n_levels: int):
    """Filtered product cells: (levels, dims, boundary id lists) in construction order."""
    shape = levels.shape
    present = int(np.count_nonzero(levels < n_levels))
    # (c, {cube}) is a distinct cell for each of the 27 lattice cells in a cube's closure
    if 27 * present > config.RESERVOIR_TOPO_MATRIX_BUDGET:
        raise SizeBudgetError(f"filtered complex has at least {27 * present} cells, "
                              f"budget is {config.RESERVOIR_TOPO_MATRIX_BUDGET}")
    padded = np.pad(levels, 1, constant_values=n_levels)

    ids: Dict[Tuple, np.ndarray] = {}
    blocks = []
    next_id = 0
    for pattern in sorted(_PATTERNS, key=sum, reverse=True):
        grid = _pattern_shape(pattern, shape)
        for t, (members, dim, _) in enumerate(_TEMPLATES[pattern]):
            cell_levels = _cell_levels(padded, pattern, members, grid)
            here = np.argwhere(cell_levels < n_levels)
            id_grid = np.full(grid, -1, dtype=np.int64)
            id_grid[tuple(here.T)] = next_id + np.arange(here.shape[0])
            next_id += here.shape[0]
            ids[(pattern, t)] = id_grid
            blocks.append((pattern, t, here, cell_levels[tuple(here.T)], sum(pattern) + dim))

    if next_id > config.RESERVOIR_TOPO_MATRIX_BUDGET:
        raise SizeBudgetError(f"filtered complex has {next_id} cells, budget is {config.RESERVOIR_TOPO_MATRIX_BUDGET}")

    all_levels = np.zeros(next_id, dtype=np.int64)
    all_dims = np.zeros(next_id, dtype=np.int64)
    boundary: List[List[int]] = [[] for _ in range(next_id)]
    for pattern, t, here, cell_levels, dim in blocks:
        if here.shape[0] == 0:
            continue
        own = ids[(pattern, t)][tuple(here.T)]
        all_levels[own] = cell_levels
        all_dims[own] = dim
        members, _, local_boundary = _TEMPLATES[pattern][t]
        faces = [ids[(pattern, s)][tuple(here.T)] for s in local_boundary]
        for axis in range(3):
            if not pattern[axis]:
                continue
            face_pattern = tuple(0 if a == axis else pattern[a] for a in range(3))
            for shift, side in ((0, _BITS[axis]), (1, 0)):
                target = _TEMPLATE_INDEX[face_pattern][frozenset(p | side for p in members)]
                at = here.copy()
                at[:, axis] += shift
                faces.append(ids[(face_pattern, target)][tuple(at.T)])
        if faces:
            stacked = np.stack(faces, axis=1)
            for cell, row in zip(own.tolist(), stacked.tolist()):
                boundary[cell] = row
    return all_levels, all_dims, boundary


def persistence_matrix(filtration: Filtration, q: int) -> PersistenceDiagram:
    """Diagram of dimension q by Z2 column reduction over a filtered model of the unstacked complexes."""
    if q not in (0, 1, 2):
        raise ValueError(f"q must be 0, 1 or 2, got {q}")
    levels, dims, columns = _realization(filtration.levels(), len(filtration))
    total = levels.size
    if total == 0:
        return PersistenceDiagram(q=q, points=[], essential=[])

    order = np.lexsort((np.arange(total), dims, levels))
    position = np.empty(total, dtype=np.int64)
    position[order] = np.arange(total)
    sorted_levels = levels[order]
    sorted_dims = dims[order]

    pivot_of: Dict[int, int] = {}
    reduced: Dict[int, set] = {}
    for j, cell in enumerate(order.tolist()):
        col = {int(position[f]) for f in columns[cell]}
        while col:
            low = max(col)
            if low in pivot_of:
                col ^= reduced[pivot_of[low]]
            else:
                pivot_of[low] = j
                reduced[j] = col
                break

    pairs, essential = [], []
    for low, j in pivot_of.items():
        if sorted_dims[low] == q and sorted_levels[low] < sorted_levels[j]:
            pairs.append((int(sorted_levels[low]), int(sorted_levels[j])))
    for j in range(total):
        if sorted_dims[j] == q and j not in reduced and j not in pivot_of:
            essential.append(int(sorted_levels[j]))
    logger.debug(f"q={q} matrix persistence over {total} cells: {len(pairs)} pairs, {len(essential)} essential")
    return _diagram(q, filtration.thresholds, pairs, essential)


# --- Bottleneck distance ---

def _pair_costs(a: np.ndarray, b: np.ndarray, norm: PlaneNorm) -> np.ndarray:
    gaps = np.abs(a[:, None, :] - b[None, :, :])
    return gaps.sum(axis=2) if norm == PlaneNorm.L1 else gaps.max(axis=2)


def _diagonal_costs(a: np.ndarray, norm: PlaneNorm) -> np.ndarray:
    spread = a[:, 1] - a[:, 0]
    return spread if norm == PlaneNorm.L1 else spread / 2.0


def _perfect_matching(cross_ok: np.ndarray, diag_a_ok: np.ndarray, diag_b_ok: np.ndarray) -> bool:
    n, m = cross_ok.shape
    adjacency = np.zeros((n + m, m + n), dtype=bool)
    adjacency[:n, :m] = cross_ok
    adjacency[np.arange(n), m + np.arange(n)] = diag_a_ok
    adjacency[n + np.arange(m), np.arange(m)] = diag_b_ok
    adjacency[n:, m:] = True
    matching = maximum_bipartite_matching(csr_matrix(adjacency), perm_type="column")
    return bool(np.all(matching >= 0))


def _finite_bottleneck(a: np.ndarray, b: np.ndarray, norm: PlaneNorm) -> float:
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    cross = _pair_costs(a, b, norm)
    diag_a, diag_b = _diagonal_costs(a, norm), _diagonal_costs(b, norm)
    candidates = np.unique(np.concatenate([cross.ravel(), diag_a, diag_b, [0.0]]))
    lo, hi = 0, candidates.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        t = candidates[mid]
        if _perfect_matching(cross <= t, diag_a <= t, diag_b <= t):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])


def bottleneck_distance(u: PersistenceDiagram, v: PersistenceDiagram,
                        norm: Union[PlaneNorm, str] = PlaneNorm.L1) -> float:
    """Exact bottleneck distance; points may match the diagonal, essential classes match each other."""
    norm = PlaneNorm(norm)
    if u.q != v.q:
        raise MetricError(f"cannot compare diagrams of dimensions {u.q} and {v.q}")
    if u.essential.size != v.essential.size:
        raise MetricError(
            f"essential classes cannot be matched: {u.essential.size} against {v.essential.size}"
        )
    essential_cost = float(np.max(np.abs(u.essential - v.essential))) if u.essential.size else 0.0
    return max(essential_cost, _finite_bottleneck(u.points, v.points, norm))


def _pair_distance(args):
    u, v, norm = args
    return bottleneck_distance(u, v, norm)


def distance_matrix(diagrams: Sequence[PersistenceDiagram], labels: Optional[Sequence[str]] = None,
                    norm: Union[PlaneNorm, str] = PlaneNorm.L1, n_jobs: Optional[int] = None) -> pd.DataFrame:
    """Symmetric all-pairs bottleneck matrix with a zero diagonal, rows and columns labelled."""
    count = len(diagrams)
    labels = [str(i) for i in range(count)] if labels is None else [str(label) for label in labels]
    if len(labels) != count:
        raise ValueError(f"{len(labels)} labels for {count} diagrams")
    pairs = list(combinations(range(count), 2))
    logger.info(f"Computing {len(pairs)} bottleneck distances between {count} diagrams")
    values = parallel_map(_pair_distance, [(diagrams[i], diagrams[j], PlaneNorm(norm)) for i, j in pairs], n_jobs)
    matrix = np.zeros((count, count))
    for (i, j), d in zip(pairs, values):
        matrix[i, j] = matrix[j, i] = d
    return pd.DataFrame(matrix, index=labels, columns=labels)


def medoid(matrix: np.ndarray, labels: Sequence[str]) -> str:
    """Label of the diagram with the smallest total distance to all others."""
    if matrix.shape[0] == 0:
        raise ValueError("empty distance matrix")
    return list(labels)[int(np.argmin(matrix.sum(axis=1)))]
