import numpy as np

from ReservoirTopology.reservoir_grid import CellSet, ScalarField
from ReservoirTopology.schemas import GridGeometry, ValueKind


def geometry_of(shape, spacings=(1.0, 1.0, 1.0)):
    return GridGeometry(counts=tuple(int(n) for n in shape), spacings=spacings)


def cell_set_of(mask, threshold=None):
    mask = np.asarray(mask, dtype=bool)
    return CellSet(geometry_of(mask.shape), mask, threshold)


def alpha_field(values, spacings=(1.0, 1.0, 1.0)):
    values = np.asarray(values, dtype=float)
    return ScalarField(geometry_of(values.shape, spacings), values, ValueKind.ALPHA)


def random_mask(rng, shape, density=0.5):
    return rng.random(shape) < density
