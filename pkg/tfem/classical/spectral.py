"""
tfem/classical/spectral.py
Spectral initialization: project on the top-k eigenvectors of X X^T,
seed with k-means++, run Lloyd there, lift the clusters back as data means.
"""

import logging

import numpy as np

from tfem.classical.lloyd import kmeanspp, lloyd
from tfem.errors import DegenerateInputError, ParameterError
from tfem.linalg.kernels import as_mat, jacobi_eigh

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12
PROJECTED_ROUNDS = 100


def top_eigvecs(x: np.ndarray, k: int) -> np.ndarray:
    """d x k top eigenvectors of X X^T; raises when the rank is below k."""
    values, vectors = jacobi_eigh(x @ x.T)
    if values[0] <= 0.0 or values[k - 1] <= RANK_TOL * values[0]:
        raise DegenerateInputError(f"rank(X X^T) < k={k} (eigenvalues {values[:k]})")
    return vectors[:, :k]


def spectral_init(x, k: int, seed: int, n_init: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """
    Args:
        x: d x N data
        k: number of clusters, k <= min(d, N)
        seed: k-means++ seed (restart i uses seed + i)
        n_init: k-means++ restarts in the projected space; the lowest objective wins

    Returns:
        (labels, d x k centroids)
    """
    x = as_mat(x, "data")
    d, n = x.shape
    if k < 1 or k > min(d, n):
        raise ParameterError(f"spectral_init needs 1 <= k <= min(d, N) = {min(d, n)}, got {k}")
    if n_init < 1:
        raise ParameterError(f"n_init must be >= 1, got {n_init}")

    basis = top_eigvecs(x, k)
    projected = basis.T @ x
    best = None
    for restart in range(n_init):
        trace = lloyd(projected, kmeanspp(projected, k, seed + restart), PROJECTED_ROUNDS)
        if best is None or trace.objectives[-1] < best.objectives[-1]:
            best = trace
    labels = best.labels

    centroids = np.zeros((d, k))
    for u in range(k):
        centroids[:, u] = x[:, labels == u].mean(axis=1)
    logger.debug("spectral_init: best of %d restarts, objective %.6g", n_init, best.objectives[-1])
    return labels, centroids
