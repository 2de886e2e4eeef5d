"""
tfem/linalg/kernels.py
Dense float64 kernels and the reference spectral solvers.

Every matrix in the package is a 2-D float64 numpy array ("Mat"). The
functions here are pure; inputs are never modified in place.
"""

import logging

import numpy as np

from tfem.errors import DegenerateInputError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)

Mat = np.ndarray

SYMMETRY_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100
JACOBI_TINY = 1e-150
OP_NORM_TOL = 1e-13
OP_NORM_MAX_ITER = 20_000


def as_mat(m, name: str = "matrix") -> Mat:
    """Coerce to a 2-D float64 array, rejecting empty input."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if arr.size == 0:
        raise ShapeError(f"{name} is empty ({arr.shape[0]}x{arr.shape[1]})")
    return arr


def _check_finite(out: Mat, op: str) -> Mat:
    if not np.all(np.isfinite(out)):
        raise DegenerateInputError(f"{op} produced non-finite entries")
    return out


def softmax_cols(m) -> Mat:
    """
    Column-wise softmax: every column is a probability vector.

    The per-column maximum is subtracted before exponentiating, so scores
    of size 1e4 (beta * ln N scaled distances) do not overflow.
    """
    arr = as_mat(m, "softmax input")
    shifted = arr - arr.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return _check_finite(e / e.sum(axis=0, keepdims=True), "softmax_cols")


def relu(m) -> Mat:
    return np.maximum(np.asarray(m, dtype=np.float64), 0.0)


def is_symmetric(a, tol: float = SYMMETRY_TOL) -> bool:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    scale = max(1.0, float(np.abs(arr).max(initial=0.0)))
    return float(np.abs(arr - arr.T).max(initial=0.0)) <= tol * scale


def require_symmetric(a, op: str) -> Mat:
    arr = as_mat(a, f"{op} input")
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{op} needs a square matrix, got {arr.shape[0]}x{arr.shape[1]}")
    if not is_symmetric(arr):
        raise PreconditionError(f"{op} needs a symmetric matrix (tolerance {SYMMETRY_TOL})")
    return arr


def jacobi_eigh(a) -> tuple[np.ndarray, Mat]:
    """
    Cyclic Jacobi eigensolver for symmetric matrices.

    Args:
        a: square symmetric matrix

    Returns:
        (eigenvalues sorted descending, eigenvectors as columns in the same order)
    """
    work = require_symmetric(a, "jacobi_eigh")
    work = 0.5 * (work + work.T)
    n = work.shape[0]
    vecs = np.eye(n)
    scale = fro(work)

    for sweep in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(max(float(np.sum(work * work) - np.sum(np.diag(work) ** 2)), 0.0))
        if off <= 1e-15 * scale or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                diff = work[q, q] - work[p, p]
                if abs(apq) < JACOBI_TINY * abs(diff):
                    # |theta| > 1/(2 JACOBI_TINY): t = 1/(2 theta) to working precision
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                work[p, q] = work[q, p] = 0.0

                vp = vecs[:, p].copy()
                vq = vecs[:, q].copy()
                vecs[:, p] = c * vp - s * vq
                vecs[:, q] = s * vp + c * vq
    else:
        logger.warning("jacobi_eigh hit %d sweeps without full convergence (n=%d)", JACOBI_MAX_SWEEPS, n)

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    return _check_finite(values[order], "jacobi_eigh"), _check_finite(vecs[:, order], "jacobi_eigh")


def power_method_ref(a, v0, steps: int) -> np.ndarray:
    """Reference trajectory v <- Av / ||Av||, exactly `steps` rounds."""
    mat = require_symmetric(a, "power_method_ref")
    v = np.asarray(v0, dtype=np.float64).ravel()
    if v.shape[0] != mat.shape[0]:
        raise ShapeError(f"start vector has length {v.shape[0]}, matrix is {mat.shape[0]}x{mat.shape[0]}")
    norm = l2(v)
    if norm == 0.0:
        raise DegenerateInputError("power_method_ref start vector is zero")
    v = v / norm
    for step in range(steps):
        y = mat @ v
        norm = l2(y)
        if norm == 0.0:
            raise DegenerateInputError(f"Av vanished at power step {step + 1}")
        v = y / norm
    return v


def l2(v) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(v, dtype=np.float64)))))


def fro(m) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(m, dtype=np.float64)))))


def op_norm(m) -> float:
    """Largest singular value via power iteration on the smaller Gram matrix."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.size == 0 or not np.any(arr):
        return 0.0
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    gram = arr.T @ arr if arr.shape[1] <= arr.shape[0] else arr @ arr.T

    rng = np.random.default_rng(0)
    v = rng.standard_normal(gram.shape[0])
    v /= l2(v)
    lam = 0.0
    for _ in range(OP_NORM_MAX_ITER):
        w = gram @ v
        lam_new = float(v @ w)
        norm = l2(w)
        if norm == 0.0:
            # start vector fell in the null space; restart from a fresh draw
            v = rng.standard_normal(gram.shape[0])
            v /= l2(v)
            continue
        v = w / norm
        if abs(lam_new - lam) <= OP_NORM_TOL * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    return float(np.sqrt(max(lam, 0.0)))
