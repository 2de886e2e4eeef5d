import numpy as np
import pytest

from tfem.classical.lloyd import kmeanspp, lloyd, lloyd_objective
from tfem.classical.minimax import minimax_shadow
from tfem.classical.power import deflation_bound, topk_deflation
from tfem.classical.spectral import spectral_init, top_eigvecs
from tfem.errors import DegenerateInputError, ParameterError
from tfem.gmm.instance import generate_instance
from tfem.gmm.metrics import misclass
from tfem.linalg.kernels import jacobi_eigh


def _spd_with_gaps(d, top, rng):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    tail = rng.uniform(0.0, min(top) - 1.0, size=d - len(top))
    values = np.concatenate([top, np.sort(tail)[::-1]])
    return q @ np.diag(values) @ q.T, values


def test_lloyd_fixed_point_example():
    x = np.array([[-10.0, -9.0, 9.0, 10.0]])
    trace = lloyd(x, np.array([[-9.5, 9.5]]), tau=5)
    assert np.array_equal(trace.assignments[1], [0, 0, 1, 1])
    assert np.allclose(trace.centroids[1], [[-9.5, 9.5]])
    assert trace.converged and trace.iterations_run == 1
    assert len(trace.assignments) == trace.iterations_run + 1 == len(trace.centroids)


def test_lloyd_sigma_zero_with_true_means():
    inst = generate_instance(k=3, d=4, per_cluster=20, delta=2.0, sigma=0.0, seed=2)
    trace = lloyd(inst.x, inst.means, tau=3)
    assert misclass(inst.z, trace.labels) == 0.0


def test_lloyd_centroids_are_means_of_previous_assignment():
    inst = generate_instance(k=4, d=3, per_cluster=25, delta=2.0, sigma=1.0, seed=5)
    trace = lloyd(inst.x, kmeanspp(inst.x, 4, 5), tau=10)
    for t in range(1, len(trace.centroids)):
        prev = trace.assignments[t - 1]
        for u in range(4):
            if np.any(prev == u):
                assert np.allclose(trace.centroids[t][:, u], inst.x[:, prev == u].mean(axis=1), atol=1e-10)


def test_lloyd_well_separated_recovers_labels():
    perfect = 0
    for seed in range(100):
        inst = generate_instance(k=4, d=5, per_cluster=50, delta=10.0, sigma=1.0, seed=seed)
        _, centroids = spectral_init(inst.x, 4, seed)
        if misclass(inst.z, lloyd(inst.x, centroids, tau=10).labels) == 0.0:
            perfect += 1
    assert perfect >= 99


def test_lloyd_objective_monotone_on_random_instances():
    rng = np.random.default_rng(8)
    for seed in range(1000):
        k = int(rng.integers(2, 6))
        d = int(rng.integers(1, 6))
        inst = generate_instance(k, d, int(rng.integers(5, 25)), float(rng.uniform(0.5, 4.0)), sigma=1.0, seed=seed)
        trace = lloyd(inst.x, kmeanspp(inst.x, k, seed), tau=100)
        assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(trace.objectives, trace.objectives[1:]))
        assert trace.converged
        assert abs(trace.objectives[-1] - lloyd_objective(inst.x, trace.labels, trace.final_centroids)) < 1e-9


def test_lloyd_reseeds_empty_cluster():
    x = np.array([[0.0, 0.1, 0.2, 10.0]])
    trace = lloyd(x, np.array([[0.1, 50.0, 60.0]]), tau=5)
    assert len(np.unique(trace.labels)) == 3


def test_lloyd_rejects_bad_tau():
    with pytest.raises(ParameterError):
        lloyd(np.zeros((1, 3)), np.zeros((1, 2)), tau=0)


def test_kmeanspp_examples():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 7))
    centers = kmeanspp(x, 7, seed=4)
    assert sorted(map(tuple, centers.T)) == sorted(map(tuple, x.T))
    one = kmeanspp(x, 1, seed=4)
    assert any(np.array_equal(one[:, 0], x[:, i]) for i in range(7))

    masses = np.array([[0.0, 5.0, -3.0], [0.0, 1.0, 4.0]])
    data = np.repeat(masses, 6, axis=1)
    for seed in range(20):
        picked = kmeanspp(data, 3, seed)
        assert sorted(map(tuple, picked.T)) == sorted(map(tuple, masses.T))
    with pytest.raises(ParameterError):
        kmeanspp(x, 8, seed=0)


def test_projection_preserves_distances_for_k_dimensional_data():
    rng = np.random.default_rng(2)
    basis, _ = np.linalg.qr(rng.normal(size=(6, 3)))
    x = basis @ rng.normal(size=(3, 40))
    y = top_eigvecs(x, 3).T @ x
    dx = np.linalg.norm(x[:, :, None] - x[:, None, :], axis=0)
    dy = np.linalg.norm(y[:, :, None] - y[:, None, :], axis=0)
    assert np.abs(dx - dy).max() < 1e-8


def test_spectral_init_is_rotation_invariant_when_k_equals_d():
    inst = generate_instance(k=3, d=3, per_cluster=30, delta=6.0, sigma=1.0, seed=6)
    q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
    labels, _ = spectral_init(inst.x, 3, seed=1)
    rotated, _ = spectral_init(q @ inst.x, 3, seed=1)
    assert misclass(labels, rotated) == 0.0


def test_spectral_init_quality_and_errors():
    good = 0
    for seed in range(100):
        inst = generate_instance(k=4, d=5, per_cluster=50, delta=10.0, sigma=1.0, seed=seed)
        labels, _ = spectral_init(inst.x, 4, seed)
        good += misclass(inst.z, labels) <= 0.10
    assert good >= 95
    with pytest.raises(DegenerateInputError):
        spectral_init(np.vstack([np.ones((1, 10)), np.zeros((2, 10))]), 2, seed=0)
    with pytest.raises(ParameterError):
        spectral_init(np.ones((2, 10)), 3, seed=0)


def test_topk_deflation_diagonal():
    res = topk_deflation(np.diag([4.0, 2.0, 1.0]), k=2, tau=60, seed=3)
    assert abs(res.eigvecs[0, 0]) >= 1.0 - 1e-9
    assert abs(res.eigvecs[1, 1]) >= 1.0 - 1e-9
    assert res.warning is None


def test_topk_deflation_flags_missing_gap():
    res = topk_deflation(3.0 * np.eye(4), k=2, tau=10, seed=0)
    assert res.warning is not None


def test_topk_deflation_eigenvalues_and_bound():
    rng = np.random.default_rng(10)
    for _ in range(20):
        a, _ = _spd_with_gaps(8, np.array([10.0, 7.0, 4.5]), rng)
        values, vectors = jacobi_eigh(a)
        res = topk_deflation(a, k=3, tau=60, seed=int(rng.integers(1 << 30)))
        assert np.abs(res.eigvals - values[:3]).max() <= 1e-6
        last = res.eigvecs[:, 2] * np.sign(res.eigvecs[:, 2] @ vectors[:, 2])
        assert np.linalg.norm(last - vectors[:, 2]) <= deflation_bound(res, values)


def test_minimax_shadow_slope():
    shadow = minimax_shadow(ratios=(3.0, 4.0, 5.0, 6.0), k=2, d=5, n=200, seeds=200)
    assert all(a >= b for a, b in zip(shadow.mean_misclass, shadow.mean_misclass[1:]))
    assert -0.25 <= shadow.slope <= -0.06


if __name__ == "__main__":
    pytest.main([__file__])
