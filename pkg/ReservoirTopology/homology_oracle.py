"""Brute-force Z2 homology of unstacked cubic complexes.

Slow but independent of the look-up tables and duality argument used by
`cubical_topology.betti_numbers`; the test-suite checks one against the other.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from . import config
from .cubical_topology import LOCAL_EDGES, LOCAL_FACES, LOCAL_VERTICES, CubicComplex
from .errors import ChainComplexError, SizeBudgetError

logger = logging.getLogger(__name__)


def _vertex_index(offset) -> int:
    return offset[0] + 2 * offset[1] + 4 * offset[2]


# local boundary incidences of one cube
EDGE_ENDPOINTS = []
for _axis, _offset in LOCAL_EDGES:
    _far = list(_offset)
    _far[_axis] = 1
    EDGE_ENDPOINTS.append((_vertex_index(_offset), _vertex_index(_far)))

FACE_EDGES = [
    [le for le, (axis, offset) in enumerate(LOCAL_EDGES) if axis != normal and offset[normal] == side]
    for normal, side in LOCAL_FACES
]

assert len(LOCAL_VERTICES) == 8 and all(len(edges) == 4 for edges in FACE_EDGES)


@dataclass(frozen=True)
class BoundaryMatrices:
    """Incidence matrices over Z2: d1 is edges x vertices, d2 faces x edges, d3 cubes x faces."""
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray

    @property
    def shapes(self) -> Tuple[Tuple[int, int], ...]:
        return self.d1.shape, self.d2.shape, self.d3.shape


def boundaries(cx: CubicComplex) -> BoundaryMatrices:
    c0, c1, c2, c3 = cx.cell_counts
    tables = cx.tables
    d1 = np.zeros((c1, c0), dtype=np.uint8)
    d2 = np.zeros((c2, c1), dtype=np.uint8)
    d3 = np.zeros((c3, c2), dtype=np.uint8)

    for le, (a, b) in enumerate(EDGE_ENDPOINTS):
        d1[tables.edges[:, le], tables.vertices[:, a]] = 1
        d1[tables.edges[:, le], tables.vertices[:, b]] = 1
    for lf, edges in enumerate(FACE_EDGES):
        for le in edges:
            d2[tables.faces[:, lf], tables.edges[:, le]] = 1
    cubes = np.arange(c3)
    for lf in range(6):
        d3[cubes, tables.faces[:, lf]] = 1

    for name, upper, lower in (("d2*d1", d2, d1), ("d3*d2", d3, d2)):
        if upper.size and lower.size and np.any((upper.astype(np.int64) @ lower.astype(np.int64)) % 2):
            raise ChainComplexError(f"{name} is not zero over Z2")
    return BoundaryMatrices(d1=d1, d2=d2, d3=d3)


def rank_z2(matrix: np.ndarray) -> int:
    """Rank over Z2 by elimination on rows packed into integer bitsets."""
    pivots = {}
    for row in matrix:
        bits = int.from_bytes(np.packbits(row.astype(np.uint8)).tobytes(), "big") if row.size else 0
        while bits:
            top = bits.bit_length() - 1
            if top in pivots:
                bits ^= pivots[top]
            else:
                pivots[top] = bits
                break
    return len(pivots)


def homology_ranks(cx: CubicComplex) -> Tuple[int, int, int]:
    """(b0, b1, b2) with b_q = dim ker d_q - rank d_{q+1}."""
    total = sum(cx.cell_counts)
    if total > config.RESERVOIR_TOPO_ORACLE_BUDGET:
        raise SizeBudgetError(
            f"complex has {total} cells, oracle budget is {config.RESERVOIR_TOPO_ORACLE_BUDGET}"
        )
    c0, c1, c2, _ = cx.cell_counts
    mats = boundaries(cx)
    r1, r2, r3 = (rank_z2(m) for m in (mats.d1, mats.d2, mats.d3))
    logger.debug(f"Oracle ranks r1={r1} r2={r2} r3={r3} on counts {cx.cell_counts}")
    return c0 - r1, c1 - r1 - r2, c2 - r2 - r3


def oracle_betti_curve(complexes: Iterable[CubicComplex]):
    """Oracle Betti triples for a sequence of complexes (e.g. every level of a filtration)."""
    return [homology_ranks(cx) for cx in complexes]
