"""
tfem/construct/layout.py
Row layouts of the context-augmented hidden state and the builders that fill them.

EM layout (D = 3d + 3k + 1 + k*d + k):
    data(d) | cent(d) | p2(d) | p1(k) | dist(k) | newp(k) | ones(1) | diff(k*d) | cnt(k)

PCA layout:
    data(d) | p2(d) | ones(1) | cov(d) | p3(k) | work(1) | yrow(1) | yhat(1)
    | gram(1) | norm2(1) | inv(1) | invn(1) | eig(k) | est(k*d)
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from tfem.classical.power import random_unit
from tfem.config.settings import Defaults
from tfem.errors import ConditioningError, FeasibilityError, ParameterError, ShapeError
from tfem.gmm.instance import GmmInstance, one_hot
from tfem.linalg.kernels import as_mat, jacobi_eigh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContextLayout:
    """Named, contiguous, disjoint row blocks."""

    blocks: tuple[tuple[str, int], ...]

    @property
    def dim(self) -> int:
        return sum(size for _, size in self.blocks)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.blocks]

    def block(self, name: str) -> slice:
        start = 0
        for block_name, size in self.blocks:
            if block_name == name:
                return slice(start, start + size)
            start += size
        raise KeyError(name)

    def row(self, name: str, index: int = 0) -> int:
        """Absolute row of entry `index` inside a block."""
        s = self.block(name)
        if not 0 <= index < s.stop - s.start:
            raise IndexError(f"{name}[{index}] outside block of size {s.stop - s.start}")
        return s.start + index

    def rows(self, name: str) -> np.ndarray:
        s = self.block(name)
        return np.arange(s.start, s.stop)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "blocks": [[name, size] for name, size in self.blocks]}


def em_layout(k: int, d: int) -> ContextLayout:
    if k < 2 or d < 1:
        raise ParameterError(f"need k >= 2 and d >= 1, got k={k}, d={d}")
    return ContextLayout((
        ("data", d), ("cent", d), ("p2", d), ("p1", k), ("dist", k),
        ("newp", k), ("ones", 1), ("diff", k * d), ("cnt", k),
    ))


def diff_rows(layout: ContextLayout, cluster: int, d: int) -> np.ndarray:
    """Rows of the d-row sub-block diff_cluster."""
    start = layout.block("diff").start + cluster * d
    return np.arange(start, start + d)


def pca_layout(k: int, d: int) -> ContextLayout:
    if k < 1 or d < 1:
        raise ParameterError(f"need k >= 1 and d >= 1, got k={k}, d={d}")
    return ContextLayout((
        ("data", d), ("p2", d), ("ones", 1), ("cov", d), ("p3", k), ("work", 1),
        ("yrow", 1), ("yhat", 1), ("gram", 1), ("norm2", 1), ("inv", 1), ("invn", 1),
        ("eig", k), ("est", k * d),
    ))


def _selector(d: int, n: int) -> np.ndarray:
    """p2[i, j] = 1{i = j}; token i stands for coordinate i."""
    if n < d:
        raise FeasibilityError(f"selector block needs N >= d tokens, got N={n}, d={d}")
    p2 = np.zeros((d, n))
    p2[:, :d] = np.eye(d)
    return p2


def build_context(instance, init_labels, init_centroids) -> tuple[np.ndarray, ContextLayout]:
    """
    Context-augmented input for the EM constructions.

    Args:
        instance: a GmmInstance or a d x N data matrix
        init_labels: length-N initial labels in [0, k)
        init_centroids: d x k initial centroids

    Returns:
        (H, layout)
    """
    x = instance.x if isinstance(instance, GmmInstance) else as_mat(instance, "x")
    centroids = as_mat(init_centroids, "init_centroids")
    d, n = x.shape
    k = centroids.shape[1]
    if centroids.shape[0] != d:
        raise ShapeError(f"init_centroids have {centroids.shape[0]} rows, data has d={d}")
    if k >= n:
        raise FeasibilityError(f"need k < N, got k={k}, N={n}")
    if len(init_labels) != n:
        raise ShapeError(f"init_labels has length {len(init_labels)}, N={n}")

    layout = em_layout(k, d)
    h = np.zeros((layout.dim, n))
    h[layout.block("data")] = x
    h[layout.block("cent"), :k] = centroids
    h[layout.block("p2")] = _selector(d, n)
    h[layout.block("p1")] = one_hot(np.asarray(init_labels), k)
    h[layout.block("ones")] = 1.0
    return h, layout


def draw_starts(x: np.ndarray, k: int, seed: int, correlation: float = Defaults.PCA_CORRELATION) -> np.ndarray:
    """
    k unit start vectors (k x d) with |<p_c, v_c>| >= correlation / sqrt(d)
    against the top eigenvectors of X X^T, redrawn up to PCA_START_TRIES times.
    """
    d = x.shape[0]
    _, vecs = jacobi_eigh(x @ x.T)
    rng = np.random.default_rng(seed)
    floor = correlation / np.sqrt(d)
    starts = np.zeros((k, d))
    for c in range(k):
        for _ in range(Defaults.PCA_START_TRIES):
            p = random_unit(d, rng)
            if abs(p @ vecs[:, c]) >= floor:
                starts[c] = p
                break
        else:
            raise ConditioningError(
                f"start vector {c} stayed below correlation {floor:.3g} after {Defaults.PCA_START_TRIES} draws"
            )
    return starts


def build_pca_context(x, k: int, seed: int, starts: Optional[np.ndarray] = None) -> tuple[np.ndarray, ContextLayout, np.ndarray]:
    """
    Input for the PCA construction.

    Returns:
        (H, layout, starts) with starts the k x d start vectors placed in p3
    """
    x = as_mat(x, "x")
    d, n = x.shape
    if not 1 <= k <= d:
        raise ParameterError(f"need 1 <= k <= d, got k={k}, d={d}")
    starts = draw_starts(x, k, seed) if starts is None else as_mat(starts, "starts")
    if starts.shape != (k, d):
        raise ShapeError(f"starts must be {k} x {d}, got {starts.shape}")

    layout = pca_layout(k, d)
    h = np.zeros((layout.dim, n))
    h[layout.block("data")] = x
    h[layout.block("p2")] = _selector(d, n)
    h[layout.block("ones")] = 1.0
    # row form: token i carries component i of start vector c
    h[layout.block("p3"), :d] = starts
    return h, layout, starts
