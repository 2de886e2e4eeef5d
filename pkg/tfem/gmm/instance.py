"""
tfem/gmm/instance.py
Gaussian-mixture problem instances and the one-hot label encoding.

Labels are 0-based cluster indices throughout the package.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from tfem.config.settings import Defaults
from tfem.errors import FeasibilityError, ParameterError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GmmInstance:
    """A sampled clustering problem: d x N data, labels, d x k means."""

    x: np.ndarray
    z: np.ndarray
    means: np.ndarray
    sigma: float
    delta: float
    alpha: float
    seed: int
    counts: tuple[int, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.means.shape[1]

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def radius(self) -> float:
        """Largest column norm of the data."""
        return float(np.sqrt(np.max(np.sum(self.x * self.x, axis=0))))


def imbalance_counts(k: int, per_cluster: int, ratio: float) -> list[int]:
    """
    Cluster sizes for the imbalance sweep.

    Clusters 0 and 1 keep `per_cluster` points, cluster 2 gets
    per_cluster*ratio and cluster 3 per_cluster*(1-ratio) (at least one point
    each). Any further clusters keep `per_cluster`.
    """
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"imbalance ratio must lie in (0, 1), got {ratio}")
    counts = [per_cluster] * k
    if k > 2:
        counts[2] = max(1, round(per_cluster * ratio))
    if k > 3:
        counts[3] = max(1, round(per_cluster * (1.0 - ratio)))
    return counts


def _min_pairwise(means: np.ndarray) -> float:
    diff = means[:, :, None] - means[:, None, :]
    dist = np.sqrt(np.sum(diff * diff, axis=0))
    k = means.shape[1]
    return float(dist[np.triu_indices(k, 1)].min())


def _place_means(k: int, d: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    # accept a cube draw only when no two means crowd each other, then rescale
    floor = 1.0 / k ** (1.0 / d)
    for attempt in range(Defaults.MAX_MEAN_TRIES):
        means = rng.uniform(-1.0, 1.0, size=(d, k))
        spread = _min_pairwise(means)
        if spread >= floor:
            logger.debug("means accepted after %d draws", attempt + 1)
            return means * (delta / spread)
    raise FeasibilityError(
        f"mean placement exceeded {Defaults.MAX_MEAN_TRIES} tries (k={k}, d={d})"
    )


def generate_instance(
    k: int,
    d: int,
    per_cluster: int | Sequence[int],
    delta: float,
    sigma: float = 1.0,
    alpha: float | None = None,
    seed: int = 0,
    sigma_range: tuple[float, float] | None = None,
) -> GmmInstance:
    """
    Sample an isotropic Gaussian mixture.

    Args:
        k: number of clusters (>= 2)
        d: dimension (>= 1)
        per_cluster: points per cluster, or a length-k count vector
        delta: exact minimum pairwise distance between means
        sigma: noise standard deviation (ignored when sigma_range is given)
        alpha: minimum cluster fraction; defaults to min(counts)/N
        seed: generator seed
        sigma_range: (lo, hi) for sigma^2 ~ Uniform[lo, hi]

    Returns:
        GmmInstance
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if not delta > 0.0:
        raise ParameterError(f"delta must be > 0, got {delta}")

    if isinstance(per_cluster, (int, np.integer)):
        counts = [int(per_cluster)] * k
    else:
        counts = [int(c) for c in per_cluster]
        if len(counts) != k:
            raise ParameterError(f"count vector has {len(counts)} entries for k={k}")
    if min(counts) < 1:
        raise ParameterError("every cluster needs at least one point")
    n = sum(counts)

    if alpha is None:
        alpha = min(counts) / n
    if not 0.0 < alpha or alpha * k > 1.0 + 1e-12:
        raise ParameterError(f"alpha={alpha} is infeasible for k={k} (need 0 < alpha <= 1/k)")
    need = math.ceil(alpha * n - 1e-9)
    if min(counts) < need:
        raise ParameterError(f"smallest cluster has {min(counts)} points, alpha requires {need}")

    rng = np.random.default_rng(seed)
    if sigma_range is not None:
        lo, hi = sigma_range
        if not 0.0 <= lo <= hi:
            raise ParameterError(f"sigma_range must satisfy 0 <= lo <= hi, got {sigma_range}")
        sigma = float(np.sqrt(rng.uniform(lo, hi)))
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")

    means = _place_means(k, d, delta, rng)
    z = rng.permutation(np.repeat(np.arange(k), counts))
    x = means[:, z] + sigma * rng.standard_normal((d, n))

    return GmmInstance(
        x=x, z=z, means=means, sigma=float(sigma), delta=float(delta),
        alpha=float(alpha), seed=int(seed), counts=tuple(counts),
    )


def one_hot(z, k: int) -> np.ndarray:
    """k x N matrix with p[j, i] = 1 iff z_i = j."""
    labels = np.asarray(z, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ParameterError(f"labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    p = np.zeros((k, labels.size))
    p[labels, np.arange(labels.size)] = 1.0
    return p


def check_same_length(z, zh) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(z, dtype=np.int64).ravel()
    b = np.asarray(zh, dtype=np.int64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"label sequences differ in length: {a.size} vs {b.size}")
    return a, b
