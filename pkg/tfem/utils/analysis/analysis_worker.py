"""
tfem/utils/analysis/analysis_worker.py
Worker functions for clustering tasks: one instance, every requested arm.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tfem.classical.lloyd import assign_nearest, kmeanspp, lloyd
from tfem.classical.spectral import spectral_init
from tfem.construct.em import run_em_construction
from tfem.errors import TfemError
from tfem.gmm.instance import GmmInstance, generate_instance, imbalance_counts, one_hot
from tfem.gmm.metrics import ari, misclass, nmi, perm_loss
from tfem.utils.file_loader import read_instance_csv

logger = logging.getLogger(__name__)

ARMS = ("lloyd", "tf", "tf_plus")
METRICS = ("perm_loss", "ari", "nmi", "misclass")


@dataclass(frozen=True)
class ClusterTask:
    """Everything one worker needs; each task carries its own seeds."""

    variable: str
    value: float
    seed: int
    instance_seed: int
    k: int
    d: int
    per_cluster: int
    delta: float
    sigma: float = 1.0
    sigma_range: Optional[tuple[float, float]] = None
    imbalance: Optional[float] = None
    tau: int = 1
    m_heads: int = 512
    beta: Optional[float] = None
    feature_seed: int = 0
    init: str = "spectral"
    arms: tuple[str, ...] = ARMS
    instance_path: Optional[str] = None


def instance_for(task: ClusterTask) -> GmmInstance:
    if task.instance_path is not None:
        return read_instance_csv(task.instance_path)
    counts = task.per_cluster
    if task.imbalance is not None:
        counts = imbalance_counts(task.k, task.per_cluster, task.imbalance)
    return generate_instance(
        task.k, task.d, counts, task.delta, sigma=task.sigma,
        seed=task.instance_seed, sigma_range=task.sigma_range,
    )


def initial_centroids(x: np.ndarray, k: int, init: str, seed: int) -> np.ndarray:
    if init == "kmeanspp":
        return kmeanspp(x, k, seed)
    _, centroids = spectral_init(x, k, seed)
    return centroids


def failed_row(task: ClusterTask, arm: str, error: Exception) -> dict:
    message = f"{error.kind}: {error.message}" if isinstance(error, TfemError) else f"{type(error).__name__}: {error}"
    row = {"variable": task.variable, "value": task.value, "seed": task.seed, "arm": arm}
    row.update({metric: np.nan for metric in METRICS})
    row.update(success=False, error=message, digest="", wall=0.0, report=None)
    return row


def run_arm(arm: str, task: ClusterTask, instance: GmmInstance, centroids: np.ndarray) -> dict:
    """
    Run one arm and score it against the true labels.

    Returns:
        result row (metrics, digest, wall time and the construction report dict)
    """
    start = time.time()
    k = instance.k
    report = None
    if arm == "lloyd":
        labels = lloyd(instance.x, centroids, task.tau).labels
        output = one_hot(labels, k)
    elif arm in ("tf", "tf_plus"):
        z0 = assign_nearest(instance.x, centroids)
        labels, output, _, report, _ = run_em_construction(
            instance, z0, centroids, task.tau, task.m_heads, task.beta,
            plus=(arm == "tf_plus"), seed=task.feature_seed,
        )
    else:
        raise ValueError(f"unknown arm {arm!r}")

    return {
        "variable": task.variable,
        "value": task.value,
        "seed": task.seed,
        "arm": arm,
        "perm_loss": perm_loss(output, one_hot(instance.z, k)),
        "ari": ari(instance.z, labels),
        "nmi": nmi(instance.z, labels),
        "misclass": misclass(instance.z, labels),
        "success": True,
        "error": "",
        "digest": report.digest() if report is not None else "",
        "wall": time.time() - start,
        "report": report.to_dict() if report is not None else None,
    }


def analyze_task(task: ClusterTask, thread_id: int) -> list[dict]:
    """
    Perform every arm of a task; a failing arm yields a failed row and the
    others still run.
    """
    logger.debug("[Task %d] %s=%g seed=%d arms=%s", thread_id, task.variable, task.value, task.seed, ",".join(task.arms))
    try:
        instance = instance_for(task)
        centroids = initial_centroids(instance.x, instance.k, task.init, task.seed)
    except Exception as e:
        logger.warning("[Task %d] setup failed: %s", thread_id, e)
        return [failed_row(task, arm, e) for arm in task.arms]

    rows = []
    for arm in task.arms:
        try:
            rows.append(run_arm(arm, task, instance, centroids))
        except Exception as e:
            logger.warning("[Task %d] arm %s failed: %s", thread_id, arm, e)
            rows.append(failed_row(task, arm, e))
    return rows
