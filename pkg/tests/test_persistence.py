from itertools import permutations

import numpy as np
import pytest

from helpers import alpha_field
from ReservoirTopology import config
from ReservoirTopology.cubical_topology import betti_numbers, foreground_components
from ReservoirTopology.errors import DiagramParseError, DomainError, FieldKindError, MetricError, SizeBudgetError
from ReservoirTopology.persistence import (
    Filtration, PersistenceDiagram, PlaneNorm, bottleneck_distance, distance_matrix, medoid,
    persistence_matrix, persistence_q0, read_diagram, write_diagram,
)
from ReservoirTopology.reservoir_grid import ScalarField
from ReservoirTopology.schemas import ValueKind


def brute_force_bottleneck(u, v, norm):
    """Minimise the largest cost over every bijection of the diagonal-augmented diagrams."""
    a, b = u.points, v.points
    n, m = len(a), len(b)
    spread = (lambda p: p[1] - p[0]) if norm == PlaneNorm.L1 else (lambda p: (p[1] - p[0]) / 2)
    gap = (lambda p, q: abs(p[0] - q[0]) + abs(p[1] - q[1])) if norm == PlaneNorm.L1 else \
        (lambda p, q: max(abs(p[0] - q[0]), abs(p[1] - q[1])))

    def cost(i, j):
        if i < n and j < m:
            return gap(a[i], b[j])
        if i < n:
            return spread(a[i])
        if j < m:
            return spread(b[j])
        return 0.0

    best = min(max([cost(i, j) for i, j in enumerate(perm)], default=0.0) for perm in permutations(range(n + m)))
    ess = max(abs(x - y) for x, y in zip(u.essential, v.essential)) if len(u.essential) else 0.0
    return max(best, ess)


def random_diagram(rng, n_points, n_essential=1):
    births = rng.random(n_points)
    deaths = births + rng.random(n_points) * (1 - births) + 1e-3
    return PersistenceDiagram(q=0, points=np.stack([births, np.minimum(deaths, 1.0)], axis=1),
                              essential=rng.random(n_essential))


# --- Filtration ---

def test_default_grid_has_101_literal_thresholds():
    filtration = Filtration.from_field(alpha_field(np.zeros((1, 1, 1))))
    assert len(filtration) == 101
    assert filtration.thresholds[10] == 0.1
    assert filtration.thresholds[-1] == 1.0


def test_filtration_from_values():
    filtration = Filtration.from_field(alpha_field([[[0.3]], [[0.1]], [[0.3]]]))
    assert Filtration.from_values(filtration.field).thresholds.tolist() == [0.1, 0.3]


def test_filtration_validation():
    with pytest.raises(ValueError):
        Filtration(alpha_field(np.zeros((1, 1, 1))), np.array([0.2, 0.1]))
    z = ScalarField(alpha_field(np.zeros((1, 1, 1))).geometry, np.zeros((1, 1, 1)), ValueKind.Z_VALUE)
    with pytest.raises(FieldKindError):
        Filtration.from_field(z)
    for step in (0.0, -0.01, float("nan")):
        with pytest.raises(DomainError):
            Filtration.from_field(alpha_field(np.zeros((1, 1, 1))), step)


def test_levels_follow_the_excursion_rule():
    filtration = Filtration(alpha_field([[[0.1]], [[0.15]], [[0.9]]]), np.array([0.1, 0.2, 0.5]))
    assert filtration.levels().ravel().tolist() == [0, 1, 3]
    for index in range(len(filtration)):
        assert filtration.cell_set(index).volume == [1, 2, 2][index]


# --- q = 0 ---

def test_three_cell_example():
    diagram = persistence_q0(Filtration.from_field(alpha_field([[[0.1]], [[0.9]], [[0.2]]])))
    assert diagram.points.tolist() == [[0.2, 0.9]]
    assert diagram.essential.tolist() == [0.1]


def test_single_minimum_gives_one_essential_class():
    values = np.add.outer(np.add.outer(np.arange(4), np.arange(4)), np.arange(4)) / 10.0
    diagram = persistence_q0(Filtration.from_field(alpha_field(values)))
    assert len(diagram.points) == 0
    assert diagram.essential.tolist() == [0.0]


def test_empty_filtration_gives_empty_diagrams():
    field = alpha_field(np.full((2, 2, 2), 0.5))
    filtration = Filtration(field, np.array([0.1, 0.2]))
    assert len(persistence_q0(filtration)) == 0
    for q in (0, 1, 2):
        assert len(persistence_matrix(filtration, q)) == 0


def test_alive_count_equals_components(rng):
    field = alpha_field(rng.random((8, 8, 8)))
    filtration = Filtration.from_field(field)
    diagram = persistence_q0(filtration)
    for index, alpha in enumerate(filtration.thresholds):
        assert diagram.alive_count(alpha) == foreground_components(filtration.cell_set(index))


# --- matrix reduction ---

def test_matrix_q0_equals_union_find(rng):
    for _ in range(10):
        filtration = Filtration.from_field(alpha_field(rng.random((6, 6, 6))))
        assert persistence_matrix(filtration, 0).same_multiset(persistence_q0(filtration))


def test_hollow_shell_cavity(hollow_shell_field):
    filtration = Filtration.from_field(hollow_shell_field)
    cavity = persistence_matrix(filtration, 2)
    assert cavity.points.tolist() == [[0.3, 0.8]]
    assert cavity.essential.size == 0
    assert len(persistence_matrix(filtration, 1)) == 0
    assert persistence_matrix(filtration, 0).essential.tolist() == [0.3]


def test_matrix_curves_match_betti_numbers(rng):
    filtration = Filtration.from_field(alpha_field(rng.random((5, 5, 5))), step=0.05)
    diagrams = [persistence_matrix(filtration, q) for q in (0, 1, 2)]
    for index, alpha in enumerate(filtration.thresholds):
        summary = betti_numbers(filtration.cell_set(index))
        assert [d.alive_count(alpha) for d in diagrams] == [summary.b0, summary.b1, summary.b2]


def test_matrix_matches_betti_numbers_on_every_block():
    for code in range(256):
        mask = np.array([(code >> bit) & 1 for bit in range(8)], dtype=bool).reshape(2, 2, 2)
        filtration = Filtration.from_values(alpha_field(np.where(mask, 0.2, 0.9)))
        diagrams = [persistence_matrix(filtration, q) for q in (0, 1, 2)]
        for index, alpha in enumerate(filtration.thresholds):
            summary = betti_numbers(filtration.cell_set(index))
            assert [d.alive_count(alpha) for d in diagrams] == [summary.b0, summary.b1, summary.b2], code


def test_ring_of_six_around_a_vertex():
    values = np.full((2, 2, 2), 0.2)
    values[0, 0, 0] = values[1, 1, 1] = 0.9
    filtration = Filtration.from_values(alpha_field(values))
    summary = betti_numbers(filtration.cell_set(0))
    assert persistence_matrix(filtration, 1).alive_count(0.2) == summary.b1


def test_matrix_budget(monkeypatch, rng):
    monkeypatch.setattr(config, "RESERVOIR_TOPO_MATRIX_BUDGET", 100)
    with pytest.raises(SizeBudgetError):
        persistence_matrix(Filtration.from_field(alpha_field(rng.random((5, 5, 5)))), 1)


def test_betti_curve():
    diagram = PersistenceDiagram(q=0, points=[[0.2, 0.5]], essential=[0.1])
    assert diagram.betti_curve([0.0, 0.1, 0.2, 0.5, 1.0]).tolist() == [0, 1, 2, 1, 1]


# --- diagrams ---

def test_diagram_rejects_non_positive_persistence():
    with pytest.raises(ValueError):
        PersistenceDiagram(q=0, points=[[0.5, 0.5]], essential=[])


def test_diagram_json(tmp_path):
    diagram = PersistenceDiagram(q=1, points=[[0.3, 0.4], [0.1, 0.9]], essential=[0.2])
    path = write_diagram(diagram, tmp_path / "d.json")
    text = path.read_text()
    assert "Infinity" not in text
    back = read_diagram(path)
    assert back.same_multiset(diagram)
    assert back.to_json() == {"q": 1, "points": [[0.1, 0.9], [0.3, 0.4]], "essential": [0.2]}


@pytest.mark.parametrize("text", ["{\"q\": 0, \"points\": [[0.1", "{\"points\": []}", "[1, 2]", ""])
def test_read_diagram_names_the_bad_file(tmp_path, text):
    path = tmp_path / "d.json"
    path.write_text(text)
    with pytest.raises(DiagramParseError) as info:
        read_diagram(path)
    assert info.value.path == path
    assert str(path) in str(info.value)


# --- bottleneck ---

def test_single_point_against_empty():
    u = PersistenceDiagram(q=0, points=[[0.0, 1.0]], essential=[])
    v = PersistenceDiagram(q=0, points=[], essential=[])
    assert bottleneck_distance(u, v) == 1.0
    assert bottleneck_distance(u, v, PlaneNorm.LINF) == 0.5


def test_self_distance_is_zero(rng):
    u = random_diagram(rng, 12)
    assert bottleneck_distance(u, u) == 0.0
    assert bottleneck_distance(u, u, "linf") == 0.0


def test_essential_classes_match_by_birth():
    u = PersistenceDiagram(q=0, points=[], essential=[0.1, 0.5])
    v = PersistenceDiagram(q=0, points=[], essential=[0.45, 0.2])
    assert bottleneck_distance(u, v) == pytest.approx(0.1)


def test_metric_errors():
    u = PersistenceDiagram(q=0, points=[], essential=[0.1])
    with pytest.raises(MetricError):
        bottleneck_distance(u, PersistenceDiagram(q=1, points=[], essential=[0.1]))
    with pytest.raises(MetricError):
        bottleneck_distance(u, PersistenceDiagram(q=0, points=[], essential=[0.1, 0.2]))


@pytest.mark.parametrize("norm", list(PlaneNorm))
def test_matches_brute_force(rng, norm):
    for _ in range(25):
        u = random_diagram(rng, int(rng.integers(0, 4)))
        v = random_diagram(rng, int(rng.integers(0, 4)))
        assert bottleneck_distance(u, v, norm) == brute_force_bottleneck(u, v, norm)


@pytest.mark.parametrize("norm", list(PlaneNorm))
def test_metric_axioms(rng, norm):
    diagrams = [random_diagram(rng, int(rng.integers(1, 8))) for _ in range(20)]
    d = distance_matrix(diagrams, norm=norm, n_jobs=1).to_numpy()
    np.testing.assert_array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    for i in range(20):
        assert np.all(d[i][:, None] <= d[i][None, :] + d + 1e-9)


def test_alpha_filtration_distances_are_bounded(rng):
    diagrams = [persistence_q0(Filtration.from_field(alpha_field(rng.random((5, 5, 5))))) for _ in range(6)]
    d = distance_matrix(diagrams, norm=PlaneNorm.L1, n_jobs=1).to_numpy()
    assert d.max() <= 1.0


def test_stability_under_small_perturbation(rng):
    eps = 0.02
    values = rng.random((10, 10, 10))
    noisy = np.clip(values + rng.uniform(-eps, eps, size=values.shape), 0.0, 1.0)
    u = persistence_q0(Filtration.from_field(alpha_field(values)))
    v = persistence_q0(Filtration.from_field(alpha_field(noisy)))
    assert bottleneck_distance(u, v, PlaneNorm.LINF) <= eps + 0.01 + 1e-12
    assert bottleneck_distance(u, v, PlaneNorm.L1) <= 2 * eps + 0.02 + 1e-12


def test_distance_matrix_labels_and_medoid():
    diagrams = [
        PersistenceDiagram(q=0, points=[], essential=[0.0]),
        PersistenceDiagram(q=0, points=[], essential=[0.1]),
        PersistenceDiagram(q=0, points=[], essential=[0.5]),
    ]
    frame = distance_matrix(diagrams, labels=["E500-1", "E500-2", "G500-1"], n_jobs=1)
    assert list(frame.index) == ["E500-1", "E500-2", "G500-1"]
    assert frame.loc["E500-1", "G500-1"] == 0.5
    assert medoid(frame.to_numpy(), frame.index) == "E500-2"
