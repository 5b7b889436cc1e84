"""Statistical and corpus-wide checks; run with `pytest -m slow`."""
from itertools import product

import numpy as np
import pytest

from helpers import alpha_field, cell_set_of, random_mask
from ReservoirTopology.batch_runner import betti_sweep, simulate_realizations
from ReservoirTopology.cubical_topology import betti_numbers, build_complex, euler_characteristic, foreground_components
from ReservoirTopology.homology_oracle import homology_ranks
from ReservoirTopology.persistence import (
    Filtration, PlaneNorm, bottleneck_distance, distance_matrix, medoid, persistence_q0,
)
from ReservoirTopology.schemas import GridGeometry, SgsConfig, VariogramKind, VariogramModel

pytestmark = pytest.mark.slow


def test_euler_and_betti_against_oracle_on_random_sets():
    rng = np.random.default_rng(500)
    for trial in range(500):
        cell_set = cell_set_of(random_mask(rng, (6, 6, 6), rng.uniform(0.2, 0.8)))
        ranks = homology_ranks(build_complex(cell_set))
        summary = betti_numbers(cell_set)
        assert euler_characteristic(build_complex(cell_set)) == ranks[0] - ranks[1] + ranks[2], trial
        assert (summary.b0, summary.b1, summary.b2) == ranks, trial


def test_q0_alive_counts_on_simulated_fields():
    geometry = GridGeometry(counts=(20, 20, 20))
    model = VariogramModel(kind=VariogramKind.EXPONENTIAL, range_m=3.0)
    for field in simulate_realizations(geometry, model, seeds=range(5)):
        filtration = Filtration.from_field(field, step=0.01)
        assert len(filtration) == 101
        diagram = persistence_q0(filtration)
        for index, alpha in enumerate(filtration.thresholds):
            assert diagram.alive_count(alpha) == foreground_components(filtration.cell_set(index))


def test_q0_stability_under_noise():
    eps, step = 0.02, 0.01
    geometry = GridGeometry(counts=(20, 20, 20))
    model = VariogramModel(kind=VariogramKind.EXPONENTIAL, range_m=3.0)
    base = simulate_realizations(geometry, model, seeds=[11], n_jobs=1)[0]
    reference = persistence_q0(Filtration.from_field(base, step=step))
    rng = np.random.default_rng(2)
    passed = 0
    for _ in range(20):
        noisy = np.clip(base.values + rng.uniform(-eps, eps, base.values.shape), 0.0, 1.0)
        perturbed = persistence_q0(Filtration.from_field(alpha_field(noisy), step=step))
        if bottleneck_distance(reference, perturbed, PlaneNorm.LINF) <= eps + step + 1e-12:
            passed += 1
    assert passed >= 19


def _models(ranges):
    return {(kind, r): VariogramModel(kind=kind, range_m=r)
            for kind, r in product((VariogramKind.EXPONENTIAL, VariogramKind.GAUSSIAN), ranges)}


def test_betti_trends_by_range():
    geometry = GridGeometry(counts=(50, 50, 50), spacings=(100.0, 100.0, 100.0))
    seeds = list(range(5))
    alphas = [0.1, 0.2, 0.5, 0.6, 0.9]
    frames = {}
    for key, model in _models((500.0, 1000.0)).items():
        fields = simulate_realizations(geometry, model, seeds, sgs_config=SgsConfig(seed=0))
        frames[key] = betti_sweep({str(s): f for s, f in zip(seeds, fields)}, alphas)

    def per_seed(key, column, alpha):
        frame = frames[key]
        return frame.loc[np.isclose(frame["alpha"], alpha), column].to_numpy()

    for kind in (VariogramKind.EXPONENTIAL, VariogramKind.GAUSSIAN):
        short, long = per_seed((kind, 500.0), "b0", 0.2), per_seed((kind, 1000.0), "b0", 0.2)
        assert long.mean() < short.mean()
        assert np.count_nonzero(long < short) >= 4

    for r in (500.0, 1000.0):
        key = (VariogramKind.EXPONENTIAL, r)
        assert np.count_nonzero(per_seed(key, "chi", 0.1) > 0) >= 4
        assert np.count_nonzero(per_seed(key, "chi", 0.5) < 0) >= 4
        assert np.count_nonzero(per_seed(key, "chi", 0.6) < 0) >= 4
        assert np.count_nonzero(per_seed(key, "chi", 0.9) > 0) >= 4


def test_eight_reservoir_distance_matrix():
    geometry = GridGeometry(counts=(25, 25, 25), spacings=(100.0, 100.0, 100.0))
    diagrams, labels = [], []
    for (kind, r), model in _models((500.0, 1000.0)).items():
        for seed, field in zip((1, 2), simulate_realizations(geometry, model, seeds=(1, 2))):
            diagrams.append(persistence_q0(Filtration.from_field(field, step=0.01)))
            labels.append(f"{kind.value[0].upper()}{int(r)}-{seed}")
    frame = distance_matrix(diagrams, labels)
    values = frame.to_numpy()
    np.testing.assert_array_equal(values, values.T)
    assert np.all(np.diag(values) == 0)
    off = values[~np.eye(8, dtype=bool)]
    assert np.all(off > 0) and np.all(off <= 1)
    assert np.all((off >= 0.01) & (off <= 0.5))
    assert medoid(values, labels) in labels
