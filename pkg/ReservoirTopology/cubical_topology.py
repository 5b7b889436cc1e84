"""Unstacked cubic complexes of cell sets and their Betti numbers.

Filled cubes are glued only along shared 2-faces (the percolation rule), so
two cubes touching along an edge or at a vertex stay apart unless a chain of
face-adjacent cubes around that edge or vertex identifies the copies.

Every identification happens at a fixed lattice position: the copies of a
lattice vertex are glued exactly when their cubes are face-connected inside
the 2x2x2 block around it, the copies of a lattice edge when their cubes are
face-connected in the 4-cube ring around it, and a lattice face carries a
single class whenever a filled cube touches it. Look-up tables over the 256
block configurations and the 16 ring configurations therefore give the cell
counts without enumerating local cells.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.cluster.hierarchy import DisjointSet

from .parallel import parallel_map
from .reservoir_grid import CellSet, ScalarField, excursion_set
from .schemas import BettiSummary

logger = logging.getLogger(__name__)

FACE_STRUCTURE = ndimage.generate_binary_structure(3, 1)
EDGE_STRUCTURE = ndimage.generate_binary_structure(3, 2)

BETTI_COLUMNS = ["alpha", "b0", "b1", "b2", "chi", "volume", "b0w", "b1w", "b2w"]


# --- Look-up tables ---

def _component_tables(n_positions: int, adjacent: Sequence[Tuple[int, int]]):
    """For every occupancy code: number of components and the smallest member of each position's component."""
    codes = 1 << n_positions
    count = np.zeros(codes, dtype=np.int64)
    rep = np.full((codes, n_positions), -1, dtype=np.int64)
    for code in range(codes):
        filled = [p for p in range(n_positions) if code >> p & 1]
        ds = DisjointSet(filled)
        for p, q in adjacent:
            if p in ds and q in ds:
                ds.merge(p, q)
        for subset in ds.subsets():
            smallest = min(subset)
            for p in subset:
                rep[code, p] = smallest
        count[code] = ds.n_subsets
    return count, rep


# 2x2x2 block around a lattice vertex: position p = ex + 2*ey + 4*ez
_BLOCK_PAIRS = [(p, p | bit) for p in range(8) for bit in (1, 2, 4) if not p & bit]
VERTEX_COUNT, VERTEX_REP = _component_tables(8, _BLOCK_PAIRS)

# 4-cube ring around a lattice edge: position r = eu + 2*ew over the two other axes
_RING_PAIRS = [(0, 1), (0, 2), (1, 3), (2, 3)]
RING_COUNT, RING_REP = _component_tables(4, _RING_PAIRS)

# Local cells of one cube
LOCAL_VERTICES = [(dx, dy, dz) for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)]  # index dx + 2dy + 4dz


def _other_axes(axis: int) -> Tuple[int, int]:
    u, w = (a for a in range(3) if a != axis)
    return u, w


# local edge 4*axis + (fu + 2*fw): runs along `axis` at offsets fu, fw on the other two axes
LOCAL_EDGES = []
for _axis in range(3):
    _u, _w = _other_axes(_axis)
    for _fw, _fu in product((0, 1), (0, 1)):
        _offset = [0, 0, 0]
        _offset[_u], _offset[_w] = _fu, _fw
        LOCAL_EDGES.append((_axis, tuple(_offset)))

# local face 2*axis + side: normal to `axis` at coordinate `side`
LOCAL_FACES = [(axis, side) for axis in range(3) for side in (0, 1)]


def _window(padded: np.ndarray, starts: Sequence[int], lengths: Sequence[int]) -> np.ndarray:
    return padded[starts[0]:starts[0] + lengths[0], starts[1]:starts[1] + lengths[1], starts[2]:starts[2] + lengths[2]]


def _vertex_codes(padded: np.ndarray, shape) -> np.ndarray:
    lengths = [n + 1 for n in shape]
    codes = np.zeros(lengths, dtype=np.int64)
    for ex, ey, ez in product((0, 1), repeat=3):
        codes |= _window(padded, (ex, ey, ez), lengths).astype(np.int64) << (ex + 2 * ey + 4 * ez)
    return codes


def _edge_codes(padded: np.ndarray, shape, axis: int) -> np.ndarray:
    u, w = _other_axes(axis)
    lengths = [n + 1 for n in shape]
    lengths[axis] = shape[axis]
    codes = np.zeros(lengths, dtype=np.int64)
    for eu, ew in product((0, 1), repeat=2):
        starts = [0, 0, 0]
        starts[axis], starts[u], starts[w] = 1, eu, ew
        codes |= _window(padded, starts, lengths).astype(np.int64) << (eu + 2 * ew)
    return codes


def _face_touched(padded: np.ndarray, shape, axis: int) -> np.ndarray:
    lengths = list(shape)
    lengths[axis] = shape[axis] + 1
    low, high = [1, 1, 1], [1, 1, 1]
    low[axis], high[axis] = 0, 1
    return _window(padded, low, lengths) | _window(padded, high, lengths)


# --- Complex ---

@dataclass(frozen=True)
class IdentificationTables:
    """Class ids of every local cell of every filled cube (cubes in C order of their indices)."""
    cubes: np.ndarray     # (m, 3) cube indices
    vertices: np.ndarray  # (m, 8)
    edges: np.ndarray     # (m, 12)
    faces: np.ndarray     # (m, 6)


@dataclass(frozen=True)
class CubicComplex:
    provenance: CellSet
    cell_counts: Tuple[int, int, int, int]

    @cached_property
    def tables(self) -> IdentificationTables:
        return _identification_tables(self.provenance)


def build_complex(cell_set: CellSet) -> CubicComplex:
    """Abstract cubic complex of the filled cubes glued along shared faces."""
    mask = cell_set.membership
    shape = mask.shape
    padded = np.pad(mask, 1, constant_values=False)
    c0 = int(VERTEX_COUNT[_vertex_codes(padded, shape)].sum())
    c1 = sum(int(RING_COUNT[_edge_codes(padded, shape, axis)].sum()) for axis in range(3))
    c2 = sum(int(np.count_nonzero(_face_touched(padded, shape, axis))) for axis in range(3))
    c3 = int(np.count_nonzero(mask))
    return CubicComplex(provenance=cell_set, cell_counts=(c0, c1, c2, c3))


def _identification_tables(cell_set: CellSet) -> IdentificationTables:
    mask = cell_set.membership
    shape = mask.shape
    padded = np.pad(mask, 1, constant_values=False)
    cubes = np.argwhere(mask)
    m = cubes.shape[0]
    lattice = np.asarray(shape) + 1

    vcodes = _vertex_codes(padded, shape)
    vkeys = np.zeros((m, 8), dtype=np.int64)
    for lv, offset in enumerate(LOCAL_VERTICES):
        at = cubes + offset
        rep = VERTEX_REP[vcodes[at[:, 0], at[:, 1], at[:, 2]], 7 - lv]
        vkeys[:, lv] = np.ravel_multi_index(at.T, lattice) * 8 + rep

    span = int(np.prod(lattice)) * 4
    ecodes = [_edge_codes(padded, shape, axis) for axis in range(3)]
    ekeys = np.zeros((m, 12), dtype=np.int64)
    for le, (axis, offset) in enumerate(LOCAL_EDGES):
        u, w = _other_axes(axis)
        at = cubes + offset
        codes = ecodes[axis]
        ring = 3 - (offset[u] + 2 * offset[w])
        rep = RING_REP[codes[at[:, 0], at[:, 1], at[:, 2]], ring]
        ekeys[:, le] = axis * span + np.ravel_multi_index(at.T, codes.shape) * 4 + rep

    fkeys = np.zeros((m, 6), dtype=np.int64)
    for lf, (axis, side) in enumerate(LOCAL_FACES):
        dims = list(shape)
        dims[axis] += 1
        at = cubes.copy()
        at[:, axis] += side
        fkeys[:, lf] = axis * span + np.ravel_multi_index(at.T, dims)

    def relabel(keys: np.ndarray) -> np.ndarray:
        if keys.size == 0:
            return keys
        _, inverse = np.unique(keys, return_inverse=True)
        return inverse.reshape(keys.shape)

    return IdentificationTables(cubes=cubes, vertices=relabel(vkeys), edges=relabel(ekeys), faces=relabel(fkeys))


def euler_characteristic(cx: CubicComplex) -> int:
    c0, c1, c2, c3 = cx.cell_counts
    return c0 - c1 + c2 - c3


# --- Connected components ---

def foreground_components(cell_set: CellSet) -> int:
    """Components of the filled cells under face adjacency."""
    _, n = ndimage.label(cell_set.membership, structure=FACE_STRUCTURE)
    return int(n)


def complement_components(cell_set: CellSet) -> int:
    """Components of R^3 minus the set: background padded by one shell, joined across faces and edges.

    Empty cubes meeting only at a vertex are already joined through an edge
    neighbour unless the other six cubes of their block are filled, and those
    six then form a face-connected ring that closes the vertex.
    """
    background = np.pad(~cell_set.membership, 1, constant_values=True)
    _, n = ndimage.label(background, structure=EDGE_STRUCTURE)
    return int(n)


# --- Betti numbers ---

def betti_numbers(cell_set: CellSet, physical: bool = False) -> BettiSummary:
    """b0 from face components, b2 from bounded complement components, b1 from chi."""
    volume: float = cell_set.volume
    if volume == 0:
        return BettiSummary(alpha=cell_set.threshold, b0=0, b1=0, b2=0, chi=0, volume=0, weighted=(0.0, 0.0, 0.0))
    b0 = foreground_components(cell_set)
    outside = complement_components(cell_set)
    chi = euler_characteristic(build_complex(cell_set))
    b2 = outside - 1
    b1 = b0 + outside - 1 - chi
    if physical:
        volume = cell_set.physical_volume
    return BettiSummary(
        alpha=cell_set.threshold, b0=b0, b1=b1, b2=b2, chi=chi, volume=volume,
        weighted=(b0 / volume, b1 / volume, b2 / volume),
    )


def betti_table(field: ScalarField, alphas: Iterable[float], physical: bool = False,
                n_jobs: Optional[int] = None) -> List[BettiSummary]:
    """Betti numbers of the excursion sets of `field` at each alpha."""
    alphas = [float(a) for a in alphas]
    logger.info(f"Computing Betti numbers at {len(alphas)} thresholds on a {field.geometry.shape} grid")
    return parallel_map(lambda a: betti_numbers(excursion_set(field, a), physical=physical), alphas, n_jobs,
                        threading=True)


def betti_frame(summaries: Iterable[BettiSummary]) -> pd.DataFrame:
    rows = [
        {"alpha": s.alpha, "b0": s.b0, "b1": s.b1, "b2": s.b2, "chi": s.chi, "volume": s.volume,
         "b0w": s.weighted[0], "b1w": s.weighted[1], "b2w": s.weighted[2]}
        for s in summaries
    ]
    return pd.DataFrame(rows, columns=BETTI_COLUMNS)
