"""
tfem/classical/minimax.py
Monte-Carlo check that Lloyd's error decays like exp(-c * delta^2 / sigma^2).
"""

import logging
from dataclasses import dataclass

import numpy as np

from tfem.classical.lloyd import lloyd
from tfem.classical.spectral import spectral_init
from tfem.gmm.instance import generate_instance
from tfem.gmm.metrics import misclass

logger = logging.getLogger(__name__)


@dataclass
class MinimaxShadow:
    ratios: list[float]
    mean_misclass: list[float]
    slope: float
    intercept: float


def minimax_shadow(
    ratios=(3.0, 4.0, 5.0, 6.0),
    k: int = 2,
    d: int = 5,
    n: int = 200,
    seeds: int = 200,
    base_seed: int = 0,
    rounds: int = 100,
) -> MinimaxShadow:
    """
    Mean misclassification of spectral-init Lloyd per separation ratio delta/sigma,
    and the least-squares slope of log(misclass) against (delta/sigma)^2.
    """
    per_cluster = n // k
    floor = 0.5 / (per_cluster * k * seeds)
    means = []
    for ratio in ratios:
        errors = []
        for s in range(seeds):
            seed = base_seed + s
            inst = generate_instance(k, d, per_cluster, delta=float(ratio), sigma=1.0, seed=seed)
            _, centroids = spectral_init(inst.x, k, seed)
            trace = lloyd(inst.x, centroids, rounds)
            errors.append(misclass(inst.z, trace.labels))
        means.append(float(np.mean(errors)))
        logger.info("delta/sigma=%.2f: mean misclass %.5f over %d seeds", ratio, means[-1], seeds)

    snr = np.square(np.asarray(ratios, dtype=np.float64))
    logs = np.log(np.maximum(np.asarray(means), floor))
    slope, intercept = np.polyfit(snr, logs, 1)
    return MinimaxShadow(ratios=[float(r) for r in ratios], mean_misclass=means, slope=float(slope), intercept=float(intercept))
