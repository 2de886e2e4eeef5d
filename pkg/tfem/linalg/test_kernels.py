import warnings

import numpy as np
import pytest

from tfem.errors import DegenerateInputError, PreconditionError, ShapeError
from tfem.linalg.kernels import (
    fro,
    jacobi_eigh,
    l2,
    op_norm,
    power_method_ref,
    relu,
    softmax_cols,
)


def test_softmax_cols_examples():
    assert np.allclose(softmax_cols([[0.0], [0.0]]), [[0.5], [0.5]], atol=1e-15)
    out = softmax_cols([[np.log(3.0)], [0.0]])
    assert np.allclose(out.ravel(), [0.75, 0.25], atol=1e-12)
    big = softmax_cols([[1e4, 0.0], [0.0, 1e4]])
    assert np.allclose(big, np.eye(2), atol=1e-12)


def test_softmax_cols_rejects_empty():
    with pytest.raises(ShapeError):
        softmax_cols(np.zeros((0, 3)))


def test_softmax_columns_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(11)
    for _ in range(200):
        rows, cols = rng.integers(1, 12, size=2)
        m = rng.normal(scale=rng.uniform(0.1, 500.0), size=(rows, cols))
        out = softmax_cols(m)
        assert np.all(out >= 0.0)
        assert np.allclose(out.sum(axis=0), 1.0, atol=1e-12)
        shift = rng.normal(scale=100.0, size=(1, cols))
        assert np.allclose(softmax_cols(m + shift), out, atol=1e-12)


def test_relu_examples():
    assert np.array_equal(relu([[-1.0, 2.0]]), [[0.0, 2.0]])
    assert np.array_equal(relu(np.zeros((3, 2))), np.zeros((3, 2)))
    assert relu([[3.5]])[0, 0] == 3.5


def test_jacobi_small_cases():
    w, v = jacobi_eigh(np.diag([3.0, 1.0]))
    assert np.allclose(w, [3.0, 1.0])
    assert abs(abs(v[0, 0]) - 1.0) < 1e-14
    w, _ = jacobi_eigh(np.eye(4))
    assert np.allclose(w, 1.0)


def test_jacobi_reconstructs_spd():
    rng = np.random.default_rng(3)
    b = rng.normal(size=(6, 6))
    a = b @ b.T + 0.1 * np.eye(6)
    w, v = jacobi_eigh(a)
    assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-8)
    assert np.all(np.diff(w) <= 0.0)


def test_jacobi_rejects_non_symmetric():
    with pytest.raises(PreconditionError):
        jacobi_eigh([[1.0, 2.0], [0.0, 1.0]])


def test_jacobi_tiny_off_diagonal_raises_no_warning():
    a = np.array([[1.0, 1e-300, 0.0], [1e-300, 2.0, 0.5], [0.0, 0.5, 3.0]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        w, v = jacobi_eigh(a)
    assert np.allclose(w, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-12)
    assert np.abs(a @ v - v * w).max() <= 1e-12
    assert np.abs(v.T @ v - np.eye(3)).max() <= 1e-12


def test_jacobi_residuals_on_random_symmetric():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        d = int(rng.integers(1, 17))
        b = rng.normal(size=(d, d))
        a = 0.5 * (b + b.T)
        w, v = jacobi_eigh(a)
        norm_a = max(np.abs(np.linalg.eigvalsh(a)).max(), 1e-300)
        assert np.abs(a @ v - v * w).max() <= 1e-8 * norm_a
        assert np.abs(v.T @ v - np.eye(d)).max() <= 1e-10
        assert np.all(np.diff(w) <= 1e-12)


def test_power_method_examples():
    v0 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    v = power_method_ref(np.diag([3.0, 1.0]), v0, 50)
    assert abs(v[0]) >= 1.0 - 1e-12
    assert abs(l2(v) - 1.0) < 1e-14

    e1 = np.array([1.0, 0.0, 0.0])
    assert np.allclose(power_method_ref(np.diag([2.0, 1.0, 0.5]), e1, 1), e1)

    start = np.array([3.0, -4.0])
    assert np.allclose(power_method_ref(np.eye(2), start, 7), start / 5.0)


def test_power_method_zero_product():
    with pytest.raises(DegenerateInputError):
        power_method_ref(np.diag([1.0, 0.0]), [0.0, 1.0], 1)
    with pytest.raises(DegenerateInputError):
        power_method_ref(np.eye(2), [0.0, 0.0], 1)


def test_norm_examples():
    assert abs(op_norm(np.diag([2.0, -5.0])) - 5.0) < 1e-10
    assert l2([3.0, 4.0]) == 5.0
    assert fro(np.ones((2, 2))) == 2.0
    assert op_norm(np.zeros((3, 3))) == 0.0


def test_op_norm_matches_jacobi_singular_value():
    rng = np.random.default_rng(5)
    for _ in range(100):
        rows, cols = rng.integers(1, 10, size=2)
        m = rng.normal(size=(rows, cols))
        w, _ = jacobi_eigh(m.T @ m)
        assert abs(op_norm(m) - np.sqrt(max(w[0], 0.0))) <= 1e-8 * max(1.0, np.sqrt(w[0]))


if __name__ == "__main__":
    pytest.main([__file__])
