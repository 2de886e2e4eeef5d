"""
tfem/gmm/metrics.py
Permutation-invariant loss and partition-comparison metrics (ARI, NMI, misclassification).
"""

from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from tfem.errors import ShapeError
from tfem.gmm.instance import check_same_length

BRUTE_FORCE_MAX_K = 8


def _l1_cost(a: np.ndarray, p1: np.ndarray) -> np.ndarray:
    # cost[u, r] = || p1[u, :] - a[r, :] ||_1
    return np.abs(p1[:, None, :] - a[None, :, :]).sum(axis=2)


def _matched_total(cost: np.ndarray, perm) -> float:
    total = 0.0
    for u, r in enumerate(perm):
        total += float(cost[u, r])
    return total


def perm_loss(a, p1, method: str = "auto") -> float:
    """
    min over label permutations of (1/N) * ||P1(pi(z)) - a||_{1,1}.

    Args:
        a: k x N output matrix (entries outside [0, 1] are fine)
        p1: k x N one-hot matrix of the true labels
        method: "auto" (brute force for k <= 8, Hungarian above), "brute" or "hungarian"

    Returns:
        The normalized loss.
    """
    a = np.asarray(a, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    if a.ndim != 2 or a.shape != p1.shape:
        raise ShapeError(f"perm_loss shapes differ: {a.shape} vs {p1.shape}")
    k, n = a.shape
    if n == 0:
        raise ShapeError("perm_loss needs at least one column")
    cost = _l1_cost(a, p1)

    if method == "auto":
        method = "brute" if k <= BRUTE_FORCE_MAX_K else "hungarian"
    if method == "brute":
        best = min(_matched_total(cost, perm) for perm in permutations(range(k)))
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(cost)
        best = _matched_total(cost, cols[np.argsort(rows)])
    else:
        raise ValueError(f"unknown perm_loss method {method!r}")
    return best / n


def contingency(z, zh) -> np.ndarray:
    """Counts n_ij of points with true class i and predicted class j (classes compacted)."""
    a, b = check_same_length(z, zh)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max(initial=-1) + 1, bi.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return float(np.sum(v * (v - 1.0) / 2.0))


def ari(z, zh) -> float:
    """Adjusted Rand index from the contingency table."""
    table = contingency(z, zh)
    n = int(table.sum())
    sum_cells = _comb2(table)
    sum_rows = _comb2(table.sum(axis=1))
    sum_cols = _comb2(table.sum(axis=0))
    total = n * (n - 1) / 2.0
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        # both partitions trivial in the same way (one cluster each, or all singletons)
        return 1.0
    return float((sum_cells - expected) / (maximum - expected))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(z, zh) -> float:
    """Normalized mutual information, arithmetic-mean normalization."""
    table = contingency(z, zh).astype(np.float64)
    n = table.sum()
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    h_true, h_pred = _entropy(rows), _entropy(cols)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    nz = table > 0
    outer = np.outer(rows, cols)
    mi = float(np.sum(table[nz] / n * np.log(n * table[nz] / outer[nz])))
    value = mi / (0.5 * (h_true + h_pred))
    return float(min(max(value, 0.0), 1.0))


def misclass(z, zh) -> float:
    """min over label permutations of mean(z != pi(zh))."""
    table = contingency(z, zh)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(1.0 - table[rows, cols].sum() / table.sum())
