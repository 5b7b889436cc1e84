import numpy as np
import pytest
from pydantic import ValidationError

from helpers import alpha_field, geometry_of
from ReservoirTopology.errors import CalibrationError, FieldKindError
from ReservoirTopology.reservoir_grid import ScalarField, excursion_set, normalize_gl
from ReservoirTopology.schemas import ClampPolicy, GridGeometry, ValueKind


def gl_field(values):
    values = np.asarray(values, dtype=float)
    return ScalarField(geometry_of(values.shape), values, ValueKind.RAW_GL)


def test_geometry_rejects_bad_counts_and_spacings():
    with pytest.raises(ValidationError):
        GridGeometry(counts=(0, 1, 1))
    with pytest.raises(ValidationError):
        GridGeometry(counts=(1, 1, 1), spacings=(1.0, -1.0, 1.0))


def test_geometry_cell_helpers():
    g = GridGeometry(counts=(100, 100, 100), spacings=(100.0, 100.0, 1.0), origin=(10.0, 20.0, 0.0))
    assert g.n_cells == 1_000_000
    assert g.cell_volume == 10_000.0
    assert g.extent == (10_000.0, 10_000.0, 100.0)
    assert g.linear_index(1, 0, 0) == 1
    assert g.linear_index(0, 1, 0) == 100
    assert g.one_based(g.linear_index(4, 5, 6)) == (5, 6, 7)
    centers = GridGeometry(counts=(2, 1, 1), spacings=(2.0, 1.0, 1.0)).cell_centers()
    np.testing.assert_allclose(centers, [[1.0, 0.5, 0.5], [3.0, 0.5, 0.5]])


def test_field_accepts_x_fastest_flat_values():
    g = geometry_of((2, 3, 1))
    field = ScalarField(g, np.arange(6.0))
    assert field.values[1, 0, 0] == 1.0
    assert field.values[0, 1, 0] == 2.0
    np.testing.assert_array_equal(field.flat(), np.arange(6.0))


def test_field_values_are_read_only():
    field = alpha_field(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        field.values[0, 0, 0] = 1.0


def test_field_rejects_wrong_count():
    with pytest.raises(ValueError):
        ScalarField(geometry_of((2, 2, 2)), np.zeros(7))


def test_normalize_gl_formula():
    field, out = normalize_gl(gl_field([[[10.0]], [[15.0]], [[20.0 - 1e-9]]]), 10.0, 20.0)
    np.testing.assert_allclose(field.values.ravel(), [0.0, 0.5, 1.0 - 1e-10])
    assert field.value_kind == ValueKind.ALPHA
    assert out.total == 0


def test_normalize_gl_clamps_and_counts():
    field, out = normalize_gl(gl_field([[[9.0]], [[20.0]], [[25.0]]]), 10.0, 20.0)
    np.testing.assert_allclose(field.values.ravel(), [0.0, 1.0, 1.0])
    assert (out.below, out.above) == (1, 2)


def test_normalize_gl_keep_policy_preserves_raw_alpha():
    field, out = normalize_gl(gl_field([[[5.0]], [[30.0]]]), 10.0, 20.0, ClampPolicy.KEEP)
    np.testing.assert_allclose(field.values.ravel(), [-0.5, 2.0])
    assert out.total == 2


def test_normalize_gl_is_order_preserving(rng):
    raw = rng.normal(50.0, 10.0, size=(4, 4, 4))
    field, _ = normalize_gl(gl_field(raw), 0.0, 100.0, ClampPolicy.KEEP)
    np.testing.assert_array_equal(np.argsort(raw, axis=None), np.argsort(field.values, axis=None))


@pytest.mark.parametrize("gl_min, gl_max", [(1.0, 1.0), (2.0, 1.0)])
def test_normalize_gl_bad_calibration(gl_min, gl_max):
    with pytest.raises(CalibrationError):
        normalize_gl(gl_field(np.zeros((1, 1, 1))), gl_min, gl_max)


def test_normalize_gl_requires_raw_values():
    with pytest.raises(FieldKindError):
        normalize_gl(alpha_field(np.zeros((1, 1, 1))), 0.0, 1.0)


def test_excursion_set_examples():
    field = alpha_field([[[0.3]], [[0.7]]])
    cells = excursion_set(field, 0.5)
    assert cells.membership.ravel().tolist() == [True, False]
    assert cells.threshold == 0.5
    assert excursion_set(field, 1.0).volume == 2
    assert excursion_set(field, 0.1).volume == 0


def test_excursion_sets_are_nested(rng):
    field = alpha_field(rng.random((5, 5, 5)))
    previous = excursion_set(field, 0.0)
    for alpha in np.linspace(0.05, 1.0, 20):
        current = excursion_set(field, alpha)
        assert previous.issubset(current)
        previous = current


def test_excursion_set_requires_alpha_field():
    with pytest.raises(FieldKindError):
        excursion_set(gl_field(np.zeros((1, 1, 1))), 0.5)


def test_physical_volume():
    field = alpha_field(np.zeros((2, 2, 1)), spacings=(100.0, 100.0, 1.0))
    cells = excursion_set(field, 0.5)
    assert cells.volume == 4
    assert cells.physical_volume == 40_000.0
