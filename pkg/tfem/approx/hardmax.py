"""
tfem/approx/hardmax.py
Hardmax, and the softmax-to-hardmax distance bound

    ||softmax(beta v) - hardmax(v)||_2 <= ((d - s) + (d - s)^2 / s^3)^(1/2) * exp(-beta * gap)

with s the size of the argmax set and gap = max(v) - max over the rest.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tfem.errors import ConstructionError, ParameterError

logger = logging.getLogger(__name__)

# relative slack for comparing two values that agree to the last ulp
BOUND_RTOL = 1e-12
# absolute slack once both values sit in the subnormal range
BOUND_ATOL = 1e-300


def hardmax(v) -> np.ndarray:
    """Uniform mass on the maximizers."""
    arr = np.asarray(v, dtype=np.float64).ravel()
    mask = arr == arr.max()
    return mask / mask.sum()


def hardmax_gap_bound(v, beta: float, check: bool = True) -> tuple[float, float]:
    """
    Args:
        check: raise ConstructionError when gap exceeds bound

    Returns:
        (gap, bound) with gap = ||softmax(beta v) - hardmax(v)||_2
    """
    arr = np.asarray(v, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ParameterError("hardmax_gap_bound needs at least two entries")
    if not beta > 0.0:
        raise ParameterError(f"beta must be > 0, got {beta}")

    top = arr.max()
    winners = arr == top
    s = int(winners.sum())
    d = arr.size
    if s == d:
        return 0.0, 0.0

    # distance written out per block so tiny tails are not lost to rounding of s + S
    tails = np.exp(beta * (arr[~winners] - top))
    total = float(tails.sum())
    winner_part = s * (total / (s * (s + total))) ** 2
    loser_part = float(np.sum((tails / (s + total)) ** 2))
    gap = math.sqrt(winner_part + loser_part)

    margin = float(top - arr[~winners].max())
    rest = d - s
    bound = math.sqrt(rest + rest * rest / s ** 3) * math.exp(-beta * margin)
    if check and not bound_holds(gap, bound):
        raise ConstructionError(f"softmax-hardmax gap {gap:.6e} exceeds bound {bound:.6e} (beta={beta}, d={d})")
    return gap, bound


def bound_holds(gap: float, bound: float) -> bool:
    return gap <= bound * (1.0 + BOUND_RTOL) + BOUND_ATOL


def assignment_beta(margin: float, n: int, k: int, mass: float = 0.01) -> float:
    """
    Smallest beta for which softmax(-beta * distances) keeps the nearest
    centroid as argmax with total leaked mass below `mass` over n points and k clusters.
    """
    if not margin > 0.0:
        raise ParameterError(f"margin must be > 0, got {margin}")
    return math.log(n * k / mass) / margin


@dataclass
class HardmaxAudit:
    draws: int
    violations: list[dict] = field(default_factory=list)
    worst_ratio: float = 0.0


def audit_hardmax(draws: int = 10_000, d_max: int = 10, beta_range=(0.1, 100.0), seed: int = 0) -> HardmaxAudit:
    """Random (v, beta) draws; every pair violating the bound is recorded."""
    rng = np.random.default_rng(seed)
    lo, hi = beta_range
    audit = HardmaxAudit(draws=draws)
    for draw in range(draws):
        d = int(rng.integers(2, d_max + 1))
        if rng.random() < 0.3:
            # integer entries make tied maximizers common
            v = rng.integers(-3, 4, size=d).astype(np.float64)
        else:
            v = rng.normal(scale=rng.uniform(0.01, 3.0), size=d)
        beta = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        gap, bound = hardmax_gap_bound(v, beta, check=False)
        if bound > 0.0:
            audit.worst_ratio = max(audit.worst_ratio, gap / bound)
        if not bound_holds(gap, bound):
            audit.violations.append({"draw": draw, "d": d, "beta": beta, "gap": gap, "bound": bound})
    if audit.violations:
        logger.error("hardmax audit: %d violations in %d draws", len(audit.violations), draws)
    return audit
