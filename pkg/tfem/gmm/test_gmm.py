import math
from itertools import permutations

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from tfem.errors import ParameterError, ShapeError
from tfem.gmm.instance import generate_instance, imbalance_counts, one_hot
from tfem.gmm.metrics import ari, misclass, nmi, perm_loss
from tfem.utils.file_loader import read_instance_csv, write_instance_csv


def _min_distance(means):
    k = means.shape[1]
    return min(np.linalg.norm(means[:, i] - means[:, j]) for i in range(k) for j in range(i + 1, k))


def test_generate_instance_shape_and_invariants():
    inst = generate_instance(k=4, d=5, per_cluster=50, delta=3.0, sigma=1.0, seed=1)
    assert inst.x.shape == (5, 200)
    assert abs(_min_distance(inst.means) - 3.0) <= 1e-9
    assert np.all(np.bincount(inst.z, minlength=4) >= math.ceil(inst.alpha * inst.n))


def test_generate_instance_sigma_zero_and_determinism():
    inst = generate_instance(k=3, d=2, per_cluster=10, delta=2.0, sigma=0.0, seed=4)
    assert np.array_equal(inst.x, inst.means[:, inst.z])
    again = generate_instance(k=3, d=2, per_cluster=10, delta=2.0, sigma=0.0, seed=4)
    assert np.array_equal(inst.x, again.x) and np.array_equal(inst.z, again.z)


def test_generate_instance_invariants_over_draws():
    rng = np.random.default_rng(0)
    for seed in range(60):
        k = int(rng.integers(2, 7))
        d = int(rng.integers(1, 8))
        counts = [int(c) for c in rng.integers(3, 20, size=k)]
        delta = float(rng.uniform(0.5, 10.0))
        inst = generate_instance(k, d, counts, delta, sigma_range=(0.5, 5.0), seed=seed)
        assert _min_distance(inst.means) >= delta - 1e-9
        assert np.all(np.bincount(inst.z, minlength=k) >= math.ceil(inst.alpha * inst.n - 1e-9))


def test_generate_instance_rejects_infeasible_alpha():
    with pytest.raises(ParameterError):
        generate_instance(k=4, d=2, per_cluster=10, delta=1.0, alpha=0.3, seed=0)
    with pytest.raises(ParameterError):
        generate_instance(k=1, d=2, per_cluster=10, delta=1.0)


def test_imbalance_counts_follow_caption_rule():
    assert imbalance_counts(4, 50, 0.2) == [50, 50, 10, 40]
    assert imbalance_counts(5, 50, 0.2) == [50, 50, 10, 40, 50]
    assert imbalance_counts(6, 50, 0.2) == [50, 50, 10, 40, 50, 50]
    assert imbalance_counts(3, 50, 0.3) == [50, 50, 15]
    assert imbalance_counts(2, 50, 0.3) == [50, 50]
    with pytest.raises(ParameterError):
        imbalance_counts(4, 50, 1.0)


def test_one_hot_examples():
    assert np.array_equal(one_hot([0, 1, 0], 2), [[1, 0, 1], [0, 1, 0]])
    assert np.array_equal(one_hot([0], 3)[:, 0], [1, 0, 0])
    z = np.array([2, 0, 1, 1, 2])
    assert np.array_equal(one_hot(z, 3).argmax(axis=0), z)
    with pytest.raises(ParameterError):
        one_hot([0, 3], 3)


def test_perm_loss_examples():
    z = np.array([0, 1, 1, 2, 0])
    p1 = one_hot(z, 3)
    assert perm_loss(p1, p1) == 0.0
    assert perm_loss(one_hot(np.array([2, 0, 1])[z], 3), p1) == 0.0
    assert perm_loss(np.full((2, 2), 0.5), one_hot([0, 1], 2)) == 1.0
    with pytest.raises(ShapeError):
        perm_loss(np.zeros((2, 3)), np.zeros((2, 4)))


def test_perm_loss_invariant_under_simultaneous_relabeling():
    rng = np.random.default_rng(9)
    for _ in range(100):
        k, n = int(rng.integers(2, 6)), int(rng.integers(3, 30))
        z = rng.integers(0, k, size=n)
        a = rng.uniform(-0.2, 1.2, size=(k, n))
        pi = rng.permutation(k)
        relabeled = np.empty_like(a)
        relabeled[pi] = a
        assert abs(perm_loss(relabeled, one_hot(pi[z], k)) - perm_loss(a, one_hot(z, k))) < 1e-12


def test_perm_loss_hungarian_matches_brute_force():
    rng = np.random.default_rng(77)
    for _ in range(500):
        k, n = int(rng.integers(2, 7)), int(rng.integers(1, 40))
        z = rng.integers(0, k, size=n)
        a = rng.uniform(0.0, 1.0, size=(k, n))
        p1 = one_hot(z, k)
        assert perm_loss(a, p1, method="hungarian") == perm_loss(a, p1, method="brute")


def test_metric_examples():
    z = [0, 0, 1, 1, 2]
    assert ari(z, z) == 1.0 and nmi(z, z) == 1.0 and misclass(z, z) == 0.0
    assert abs(ari([0, 0, 1, 1], [0, 1, 0, 1]) - (-0.5)) < 1e-12
    assert misclass([0, 0, 1, 2], [2, 2, 0, 1]) == 0.0
    with pytest.raises(ShapeError):
        ari([0, 1], [0, 1, 1])


def test_metrics_match_sklearn():
    rng = np.random.default_rng(21)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        z = rng.integers(0, int(rng.integers(1, 6)), size=n)
        zh = rng.integers(0, int(rng.integers(1, 6)), size=n)
        assert abs(ari(z, zh) - adjusted_rand_score(z, zh)) < 1e-10
        assert abs(nmi(z, zh) - normalized_mutual_info_score(z, zh, average_method="arithmetic")) < 1e-10
        assert -1.0 <= ari(z, zh) <= 1.0
        assert 0.0 <= nmi(z, zh) <= 1.0


def test_misclass_is_min_over_permutations():
    rng = np.random.default_rng(13)
    for _ in range(50):
        k, n = 3, 12
        z = rng.integers(0, k, size=n)
        zh = rng.integers(0, k, size=n)
        brute = min(np.mean(z != np.array(pi)[zh]) for pi in permutations(range(k)))
        assert abs(misclass(z, zh) - brute) < 1e-12


def test_instance_csv_round_trip(tmp_path):
    inst = generate_instance(k=3, d=4, per_cluster=[5, 7, 6], delta=2.5, sigma=0.7, seed=8)
    path = write_instance_csv(str(tmp_path / "inst.csv"), inst)
    back = read_instance_csv(path)
    assert np.array_equal(back.x, inst.x)
    assert np.array_equal(back.z, inst.z)
    assert np.array_equal(back.means, inst.means)
    assert (back.sigma, back.delta, back.alpha, back.seed) == (inst.sigma, inst.delta, inst.alpha, inst.seed)
    with open(path) as f:
        assert f.readline().strip() == "#k,d,N,sigma,delta,alpha,seed"


if __name__ == "__main__":
    pytest.main([__file__])
