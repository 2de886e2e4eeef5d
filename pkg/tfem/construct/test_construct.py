import numpy as np
import pandas as pd
import pytest
from scipy.optimize import nnls

from tfem.approx.hardmax import assignment_beta
from tfem.classical.lloyd import lloyd
from tfem.classical.spectral import spectral_init
from tfem.config.settings import Defaults
from tfem.construct.audit import audit_selection_layers, estep_fidelity
from tfem.construct.em import (
    build_em_tf,
    build_em_tf_plus,
    em_construction_for,
    extract_assignments,
    run_em_construction,
)
from tfem.construct.layout import build_context, build_pca_context, draw_starts
from tfem.construct.pca import (
    build_pca_tf,
    decode_estimates,
    estimate_bound,
    run_pca_construction,
    spectral_range,
    tau_split,
)
from tfem.errors import ConditioningError, FeasibilityError, ParameterError, ShapeError
from tfem.gmm.instance import generate_instance, one_hot
from tfem.gmm.metrics import perm_loss
from tfem.linalg.kernels import jacobi_eigh, power_method_ref
from tfem.transformer.engine import layer_forward, tf_forward
from tfem.transformer.norms import space_check


def _spd_data(d, top, tail_hi, rng):
    """x = Q diag(sqrt(lambda)) Q^T so that X X^T = Q diag(lambda) Q^T."""
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    tail = np.sort(rng.uniform(0.0, tail_hi, size=d - len(top)))[::-1]
    values = np.concatenate([top, tail])
    return q @ np.diag(np.sqrt(values)) @ q.T, values


def _aligned_cos(estimate, truth):
    return abs(float(estimate @ truth)) / float(np.linalg.norm(estimate) * np.linalg.norm(truth))


# ================================
# Layouts and contexts
# ================================

def test_build_context_blocks():
    x = np.array([[0.0, 1.0, 5.0, 6.0], [0.0, 0.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0]])
    centroids = np.array([[0.5, 5.5], [0.0, 1.0], [1.5, 3.5]])
    h, layout = build_context(x, [0, 0, 1, 1], centroids)
    assert h.shape == (3 * 3 + 3 * 2 + 1 + 2 * 3 + 2, 4)
    assert np.array_equal(h[layout.block("data")], x)
    assert np.array_equal(h[layout.block("cent"), :2], centroids)
    assert np.array_equal(h[layout.block("cent"), 2:], np.zeros((3, 2)))
    assert np.array_equal(h[layout.block("p2")], np.eye(3, 4))
    assert np.array_equal(h[layout.block("p1")], [[1, 1, 0, 0], [0, 0, 1, 1]])
    assert np.array_equal(h[layout.block("ones")], np.ones((1, 4)))
    for name in ("dist", "newp", "diff", "cnt"):
        assert not h[layout.block(name)].any()


def test_build_context_errors():
    x = np.zeros((3, 2))
    with pytest.raises(FeasibilityError):
        build_context(x, [0, 1], np.zeros((3, 2)))
    with pytest.raises(ShapeError):
        build_context(np.zeros((3, 5)), [0, 1], np.zeros((3, 2)))


def test_pca_context_places_starts_in_row_form():
    x = np.diag([2.0, 1.0, 0.5])
    starts = np.array([[0.6, 0.8, 0.0]])
    h, layout, got = build_pca_context(x, 1, seed=0, starts=starts)
    assert np.array_equal(got, starts)
    assert np.array_equal(h[layout.block("p3")], starts)
    assert np.array_equal(h[layout.block("p2")], np.eye(3))
    with pytest.raises(ParameterError):
        build_pca_context(x, 4, seed=0)


def test_draw_starts_correlation():
    rng = np.random.default_rng(0)
    x, _ = _spd_data(6, np.array([5.0, 3.0]), 1.0, rng)
    starts = draw_starts(x, 2, seed=1)
    _, vecs = jacobi_eigh(x @ x.T)
    for c in range(2):
        assert np.linalg.norm(starts[c]) == pytest.approx(1.0)
        assert abs(starts[c] @ vecs[:, c]) >= Defaults.PCA_CORRELATION / np.sqrt(6)
    with pytest.raises(ConditioningError):
        draw_starts(x, 1, seed=1, correlation=2.0 * np.sqrt(6))


# ================================
# EM constructions
# ================================

@pytest.mark.parametrize("tau", [1, 2, 3])
@pytest.mark.parametrize("k", [2, 3, 4])
def test_em_layer_counts(tau, k):
    params, report = build_em_tf(k, 5, 20, tau, m_heads=16)
    assert params.layer_count == tau * (3 + 3 * k) == report.layer_count
    assert len(report.selection_layers) == tau * k
    plus, plus_report = build_em_tf_plus(k, 5, 20, tau, m_heads=64)
    assert plus.layer_count == tau * (7 + 3 * k)
    assert plus_report.estep_layers == 7
    assert params.readout_left.shape == (k, 3 * 5 + 3 * k + 1 + k * 5 + k)


def test_em_rejects_bad_shapes():
    with pytest.raises(ParameterError):
        build_em_tf(3, 3, 20, 1, 16)
    with pytest.raises(ParameterError):
        build_em_tf(2, 5, 5, 1, 16)
    with pytest.raises(ParameterError):
        build_em_tf(2, 5, 20, 0, 16)


def test_extract_assignments_examples():
    out = np.array([[0.9, 0.5, 0.2], [0.1, 0.5, 0.8]])
    assert np.array_equal(extract_assignments(out), [0, 0, 1])


def test_sigma_zero_round_matches_truth():
    inst = generate_instance(k=2, d=3, per_cluster=50, delta=10.0, sigma=0.0, seed=0)
    labels, output, params, report, h = run_em_construction(inst, inst.z, inst.means, tau=1, m_heads=2048)
    assert perm_loss(output, one_hot(inst.z, 2)) <= 1e-6
    assert np.array_equal(labels, inst.z)
    deviations = audit_selection_layers(params, report, h)
    assert len(deviations) == 2


def test_one_round_matches_lloyd():
    exact, rng = 0, np.random.default_rng(7)
    for trial in range(50):
        k = 2 if trial % 2 == 0 else 3
        inst = generate_instance(k=k, d=5, per_cluster=150 // k, delta=8.0, sigma=1.0, seed=int(rng.integers(1 << 30)))
        _, centroids = spectral_init(inst.x, k, seed=trial)
        trace = lloyd(inst.x, centroids, tau=1)
        labels, output, *_ = run_em_construction(inst, trace.assignments[0], centroids, tau=1, m_heads=2048)
        target = trace.assignments[1]
        assert perm_loss(output, one_hot(target, k)) <= 0.05
        exact += int(np.array_equal(labels, target))
    assert exact >= 49


def test_labels_match_lloyd_beyond_fit_margin():
    # gamma: second-nearest minus nearest distance to Lloyd's round-1 centroids
    rng = np.random.default_rng(12)
    covered = 0
    for trial in range(20):
        inst = generate_instance(k=3, d=5, per_cluster=40, delta=3.0, sigma=1.0, seed=int(rng.integers(1 << 30)))
        _, centroids = spectral_init(inst.x, 3, seed=trial)
        trace = lloyd(inst.x, centroids, tau=1)
        _, report = em_construction_for(inst, tau=1, m_heads=2048)
        threshold = 2.0 * (report.bounds["norm"] + report.bounds["estep"])

        dist = np.linalg.norm(inst.x[:, None, :] - trace.centroids[1][:, :, None], axis=0)
        nearest = np.sort(dist, axis=0)
        eligible = nearest[1] - nearest[0] > threshold
        beta = assignment_beta(threshold, inst.n, 3)
        labels, *_ = run_em_construction(inst, trace.assignments[0], centroids, tau=1, m_heads=2048, beta=beta)
        assert np.array_equal(labels[eligible], trace.assignments[1][eligible]), trial
        covered += int(eligible.sum())
    assert covered >= 0.25 * 20 * 120


def test_plus_estep_is_sharper_over_seed_panel():
    losses = {"tf": [], "plus": []}
    for seed in range(20):
        inst = generate_instance(k=2, d=5, per_cluster=60, delta=4.0, sigma=1.0, seed=seed)
        _, centroids = spectral_init(inst.x, 2, seed=seed)
        trace = lloyd(inst.x, centroids, tau=1)
        h, _ = build_context(inst, trace.assignments[0], centroids)

        params, report = em_construction_for(inst, tau=1, m_heads=256)
        plus, plus_report = em_construction_for(inst, tau=1, m_heads=256, plus=True)
        softmax_error = estep_fidelity(params, report, h, trace.centroids[1])
        newton_error = estep_fidelity(plus, plus_report, h, trace.centroids[1])
        assert newton_error <= 1e-8
        assert newton_error <= softmax_error <= report.bounds["estep"]

        target = one_hot(trace.assignments[1], 2)
        losses["tf"].append(perm_loss(tf_forward(params, h), target))
        losses["plus"].append(perm_loss(tf_forward(plus, h), target))
    # a point near a tie keeps a soft assignment that moves slightly either way with the E-step error
    assert np.all(np.array(losses["plus"]) <= np.array(losses["tf"]) + 1e-5)
    assert np.mean(losses["plus"]) <= np.mean(losses["tf"]) + 1e-6


def _loss_terms(frame: pd.DataFrame) -> np.ndarray:
    return np.column_stack([np.sqrt(np.log(frame["m"]) / frame["m"]), 1.0 / frame["n"]])


def _fit_loss_terms(frame: pd.DataFrame) -> tuple[np.ndarray, pd.DataFrame]:
    cells = frame.groupby(["m", "n"], as_index=False)["loss"].mean()
    coef, _ = nnls(_loss_terms(cells), cells["loss"].to_numpy())
    return coef, cells


def test_end_to_end_loss_follows_fit_and_sample_terms():
    """
    perm_loss against Lloyd's round-1 labels over atom counts M and token
    counts N, fitted as a * sqrt(log M / M) + b / N on the cell means. The
    fit on either half of the seeds predicts every cell within 50% of the
    other half.
    """
    rows = []
    for m in (64, 256):
        for per_cluster in (50, 150):
            for seed in range(16):
                inst = generate_instance(k=2, d=5, per_cluster=per_cluster, delta=1.5, sigma=1.0, seed=seed)
                _, centroids = spectral_init(inst.x, 2, seed=seed)
                trace = lloyd(inst.x, centroids, tau=1)
                _, output, *_ = run_em_construction(inst, trace.assignments[0], centroids, tau=1, m_heads=m)
                rows.append((m, inst.n, seed, perm_loss(output, one_hot(trace.assignments[1], 2))))
    frame = pd.DataFrame(rows, columns=["m", "n", "seed", "loss"])

    by_m = frame.groupby("m")["loss"].mean()
    assert by_m[64] >= 1e-3
    assert by_m[256] < by_m[64]

    coef, cells = _fit_loss_terms(frame)
    predicted = _loss_terms(cells) @ coef
    assert np.all(cells["loss"].to_numpy() <= 2.0 * predicted)

    even, _ = _fit_loss_terms(frame[frame["seed"] % 2 == 0])
    odd, _ = _fit_loss_terms(frame[frame["seed"] % 2 == 1])
    first, second = _loss_terms(cells) @ even, _loss_terms(cells) @ odd
    assert np.all(np.abs(first - second) <= 0.5 * np.maximum(first, second))


def test_report_is_plain_json():
    _, report = build_em_tf(2, 4, 12, 1, m_heads=32)
    data = report.to_dict()
    assert data["kind"] == "em"
    assert data["layout"]["dim"] == 3 * 4 + 3 * 2 + 1 + 2 * 4 + 2
    assert report.digest() == build_em_tf(2, 4, 12, 1, m_heads=32)[1].digest()
    assert report.predicted_bound > 0.0


def test_space_check_on_construction():
    params, report = build_em_tf(2, 4, 12, 2, m_heads=32)
    assert space_check(params, report.param_norm, 2, report.layer_count)
    verdict = space_check(params, report.param_norm / 2.0, 1, report.layer_count - 1)
    assert not verdict
    assert verdict.reasons == ["norm", "heads", "layers"]


# ================================
# PCA construction
# ================================

def test_tau_split():
    assert tau_split(10, 3) == [4, 3, 3]
    assert tau_split(6, 2) == [3, 3]
    assert tau_split(60, 3) == [24, 20, 16]
    assert tau_split(2, 3) == [1, 1, 0]
    assert sum(tau_split(61, 4)) == 61
    assert all(a >= b for a, b in zip(tau_split(61, 4), tau_split(61, 4)[1:]))


def test_pca_layer_count():
    params, report = build_pca_tf(4, 2, tau_power=10, m_heads=64)
    assert params.layer_count == 29 == report.layer_count
    assert report.constants["tau_split"] == [6, 4]
    assert set(report.heads_per_layer) <= {2, 4}
    with pytest.raises(ParameterError):
        build_pca_tf(3, 4, 10, 64)


def test_pca_diagonal_example():
    x = np.diag([np.sqrt(3.0), 1.0])
    vectors, eigs, _, report, _ = run_pca_construction(x, k=1, tau_power=10, m_heads=256)
    assert _aligned_cos(vectors[:, 0], np.array([1.0, 0.0])) >= 0.99
    assert report.kind == "pca"
    assert eigs[0] > 0.0


def test_pca_covariance_and_first_power_step():
    rng = np.random.default_rng(2)
    x, _ = _spd_data(4, np.array([6.0, 3.0]), 1.0, rng)
    h, layout, starts = build_pca_context(x, 2, seed=0)
    params, _ = build_pca_tf(4, 2, tau_power=4, m_heads=128, eig_range=spectral_range(x, 2))
    _, states = tf_forward(params, h, trace=True)
    a = x @ x.T
    assert np.allclose(states[1][layout.block("cov"), :4], a, atol=1e-12)
    assert np.allclose(states[1][layout.row("work"), :4], starts[0], atol=1e-14)
    assert np.allclose(states[2][layout.row("yrow"), :4], a @ starts[0], atol=1e-10)
    for index, layer in enumerate(params.layers):
        assert np.array_equal(layer_forward(layer, states[index]), states[index + 1])


def test_pca_power_steps_telescope():
    rng = np.random.default_rng(2)
    x, _ = _spd_data(4, np.array([6.0, 3.0]), 1.0, rng)
    h, layout, starts = build_pca_context(x, 2, seed=0)
    lo, hi = spectral_range(x, 2)
    params, report = build_pca_tf(4, 2, tau_power=10, m_heads=128, eig_range=(lo, hi))
    _, states = tf_forward(params, h, trace=True)
    a = x @ x.T
    tol = 2.0 * report.fit_errors["gram_rel"] + 1e-9

    # states[1 + 2j] holds the work vector after j apply/scale pairs
    previous = starts[0]
    for j in range(1, report.constants["tau_split"][0] + 1):
        work = states[1 + 2 * j][layout.row("work"), :4]
        assert np.allclose(work / np.linalg.norm(work), power_method_ref(a, starts[0], j), atol=1e-9)
        ratio = np.linalg.norm(work) * hi * np.linalg.norm(previous) / np.linalg.norm(a @ previous)
        assert abs(ratio - 1.0) <= tol
        previous = work


def test_pca_recovers_top_eigenvectors():
    """
    Top eigenvalues (t0 + 5, t0 + 3.5, t0 + 2) with t0 ~ U[1, 3] over a tail
    drawn from U[0, 2]: consecutive top gaps of 1.5 and at least 1 down to
    the tail, eigenvectors uniformly random.
    """
    rng = np.random.default_rng(10)
    for _ in range(20):
        t0 = rng.uniform(1.0, 3.0)
        x, _ = _spd_data(8, t0 + np.array([5.0, 3.5, 2.0]), 2.0, rng)
        _, truth = jacobi_eigh(x @ x.T)
        vectors, _, _, report, _ = run_pca_construction(x, k=3, tau_power=60, m_heads=512,
                                                        seed=int(rng.integers(1 << 30)))
        assert report.constants["tau_split"] == [24, 20, 16]
        assert report.fit_errors["rho_rel"] < 0.05
        assert _aligned_cos(vectors[:, 0], truth[:, 0]) >= 0.99
        assert _aligned_cos(vectors[:, 2], truth[:, 2]) >= 0.95


def test_pca_estimate_bound():
    rng = np.random.default_rng(4)
    x, values = _spd_data(6, np.array([8.0, 4.0]), 1.0, rng)
    a = x @ x.T
    _, truth = jacobi_eigh(a)
    vectors, *_ = run_pca_construction(x, k=2, tau_power=40, m_heads=512, seed=3)
    last = vectors[:, 1] / np.linalg.norm(vectors[:, 1])
    last = last * np.sign(last @ truth[:, 1])
    bound = estimate_bound(a, vectors, values)
    assert np.isfinite(bound)
    assert np.linalg.norm(last - truth[:, 1]) <= bound


def test_decode_estimates_and_conditioning():
    out = np.arange(6.0)[:, None]
    assert np.array_equal(decode_estimates(out, 3, 2), [[0.0, 3.0], [1.0, 4.0], [2.0, 5.0]])
    with pytest.raises(ShapeError):
        decode_estimates(out, 2, 2)
    with pytest.raises(ConditioningError):
        spectral_range(np.diag([1.0, 0.0]), 2)


if __name__ == "__main__":
    pytest.main([__file__])
