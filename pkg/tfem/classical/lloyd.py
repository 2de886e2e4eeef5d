"""
tfem/classical/lloyd.py
Lloyd's algorithm (the EM specialization for isotropic mixtures) and k-means++.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from tfem.errors import ParameterError, ShapeError
from tfem.linalg.kernels import as_mat

logger = logging.getLogger(__name__)

OBJECTIVE_SLACK = 1e-9


@dataclass
class LloydTrace:
    """
    Per-iteration record of a Lloyd run.

    assignments[t] is z^(t); centroids[t] is mu^(t), with mu^(0) the
    initial centroids and mu^(t) (t >= 1) the means of z^(t-1).
    """

    assignments: list[np.ndarray] = field(default_factory=list)
    centroids: list[np.ndarray] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0

    @property
    def labels(self) -> np.ndarray:
        return self.assignments[-1]

    @property
    def final_centroids(self) -> np.ndarray:
        return self.centroids[-1]


def sq_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """k x N matrix of squared Euclidean distances."""
    diff = x[:, None, :] - centroids[:, :, None]
    return np.sum(diff * diff, axis=0)


def assign_nearest(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # np.argmin keeps the first minimum: ties go to the lowest cluster index
    return np.argmin(sq_distances(x, centroids), axis=0)


def lloyd_objective(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    diff = x - centroids[:, labels]
    return float(np.sum(diff * diff))


def _means_with_reseed(x: np.ndarray, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Cluster means; an empty cluster takes the point farthest from its own mean."""
    labels = labels.copy()
    d = x.shape[0]
    for _ in range(k):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            break
        sums = np.zeros((d, k))
        np.add.at(sums.T, labels, x.T)
        means = sums / np.maximum(counts, 1)
        far = np.sum((x - means[:, labels]) ** 2, axis=0)
        far[counts[labels] < 2] = -1.0
        donor = int(np.argmax(far))
        logger.debug("cluster %d empty, reseeded with point %d", empty[0], donor)
        labels[donor] = empty[0]

    counts = np.bincount(labels, minlength=k)
    sums = np.zeros((d, k))
    np.add.at(sums.T, labels, x.T)
    return sums / np.maximum(counts, 1), labels


def lloyd(x, init_centroids, tau: int, center_tol: float = 0.0) -> LloydTrace:
    """
    Run tau rounds of centroid update + nearest-centroid reassignment.

    Args:
        x: d x N data
        init_centroids: d x k starting centroids; z^(0) is their nearest assignment
        tau: maximum number of rounds (>= 1)
        center_tol: if > 0, also stop once ||mu^(t) - mu^(t-1)||_F < center_tol

    Returns:
        LloydTrace
    """
    x = as_mat(x, "data")
    mu = as_mat(init_centroids, "init_centroids").copy()
    if mu.shape[0] != x.shape[0]:
        raise ShapeError(f"centroids are {mu.shape[0]}-dimensional, data is {x.shape[0]}-dimensional")
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau}")
    k = mu.shape[1]

    z = assign_nearest(x, mu)
    trace = LloydTrace(assignments=[z], centroids=[mu], objectives=[lloyd_objective(x, z, mu)])

    for t in range(1, tau + 1):
        new_mu, z_used = _means_with_reseed(x, z, k)
        new_z = assign_nearest(x, new_mu)
        obj = lloyd_objective(x, new_z, new_mu)
        prev = trace.objectives[-1]
        assert obj <= prev + OBJECTIVE_SLACK * max(1.0, prev), (
            f"Lloyd objective increased at round {t}: {prev} -> {obj}"
        )

        shift = float(np.linalg.norm(new_mu - mu))
        repeated = np.array_equal(new_z, z) and np.array_equal(z_used, z)
        trace.assignments.append(new_z)
        trace.centroids.append(new_mu)
        trace.objectives.append(obj)
        trace.iterations_run = t
        z, mu = new_z, new_mu
        if repeated or (center_tol > 0.0 and shift < center_tol):
            trace.converged = True
            break

    return trace


def kmeanspp(x, k: int, seed: int) -> np.ndarray:
    """
    D^2-weighted seeding.

    Args:
        x: d x N data
        k: number of centers (<= N)
        seed: generator seed

    Returns:
        d x k matrix of centers (columns of x)
    """
    x = as_mat(x, "data")
    n = x.shape[1]
    if k < 1 or k > n:
        raise ParameterError(f"k must lie in [1, N={n}], got {k}")
    rng = np.random.default_rng(seed)

    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[:, [chosen[0]]]) ** 2, axis=0)
    while len(chosen) < k:
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point duplicates a center: pick among unchosen columns
            rest = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(rest))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[:, [idx]]) ** 2, axis=0))
    return x[:, chosen].copy()
