"""
tfem/classical/power.py
Top-k eigenvectors by power iteration with deflation A_{i+1} = A_i - ||A_i p|| p p^T.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from tfem.errors import ParameterError
from tfem.linalg.kernels import require_symmetric, jacobi_eigh, l2, power_method_ref

logger = logging.getLogger(__name__)

GAP_TOL = 1e-8


@dataclass
class DeflationResult:
    eigvecs: np.ndarray                  # d x k, column c estimates v_c
    eigvals: np.ndarray                  # ||A_c v_c|| per vector
    deltas: list[float] = field(default_factory=list)    # change made by one further power step
    residuals: list[float] = field(default_factory=list)  # ||A_c v - (v^T A_c v) v||, floored at eps*||A||
    warning: str | None = None


def random_unit(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on the sphere via a normalized Gaussian."""
    v = rng.standard_normal(d)
    return v / l2(v)


def _gap(values: np.ndarray, k: int) -> float:
    top = values[: k + 1] if values.size > k else np.append(values[:k], -np.inf)
    return float(np.min(top[:-1] - top[1:]))


def topk_deflation(a, k: int, tau: int, seed: int) -> DeflationResult:
    """
    Args:
        a: symmetric PSD matrix
        k: number of eigenvectors
        tau: power steps per vector
        seed: seed for the random start vectors

    Returns:
        DeflationResult (warning set when the top-(k+1) spectrum has no gap)
    """
    a = require_symmetric(a, "topk_deflation")
    d = a.shape[0]
    if not 1 <= k <= d:
        raise ParameterError(f"k must lie in [1, {d}], got {k}")

    values, _ = jacobi_eigh(a)
    scale = max(1.0, abs(float(values[0])))
    warning = None
    gap = _gap(values, k)
    if gap < GAP_TOL * scale:
        warning = f"spectral gap {gap:.3e} below {GAP_TOL:g} among the top {k + 1} eigenvalues"
        logger.warning("topk_deflation: %s", warning)

    rng = np.random.default_rng(seed)
    current = a.copy()
    floor = np.finfo(np.float64).eps * scale
    vecs = np.zeros((d, k))
    vals = np.zeros(k)
    deltas, residuals = [], []
    for c in range(k):
        v = power_method_ref(current, random_unit(d, rng), tau)
        y = current @ v
        lam = l2(y)
        nxt = y / lam if lam > 0.0 else v
        deltas.append(l2(nxt - v))
        residuals.append(max(l2(y - float(v @ y) * v), floor))
        vecs[:, c] = v
        vals[c] = lam
        current = current - lam * np.outer(v, v)

    return DeflationResult(eigvecs=vecs, eigvals=vals, deltas=deltas, residuals=residuals, warning=warning)


def deflation_bound(result: DeflationResult, true_values: np.ndarray) -> float:
    """(max delta_i + sum sqrt(8) lambda_i sqrt(eps_i)) / gap, over the estimated vectors."""
    k = result.eigvecs.shape[1]
    gap = _gap(np.asarray(true_values, dtype=np.float64), k)
    if gap <= 0.0:
        return float("inf")
    spread = sum(np.sqrt(8.0) * abs(lam) * np.sqrt(eps) for lam, eps in zip(true_values[:k], result.residuals))
    return float((max(result.deltas) + spread) / gap)
