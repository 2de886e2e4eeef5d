"""
tfem/construct/blocks.py
Weight-building helpers shared by the constructions: sparse head matrices
and an FC builder whose units come in ReLU pairs, relu(u) - relu(-u) = u.
"""

from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from tfem.approx.features import FeatureApprox, fit_relu_features
from tfem.transformer.engine import Activation, AttnHead, Layer

Entry = tuple[int, int, float]


def sparse(dim: int, entries: Iterable[Entry]) -> np.ndarray:
    m = np.zeros((dim, dim))
    for row, col, value in entries:
        m[row, col] += value
    return m


def head(dim: int, v: Iterable[Entry] = (), q: Iterable[Entry] = (), k: Iterable[Entry] = ()) -> AttnHead:
    return AttnHead(v=sparse(dim, v), q=sparse(dim, q), k=sparse(dim, k))


def linear_pair(dim: int, v: Iterable[Entry], q: Iterable[Entry], k: Iterable[Entry]) -> list[AttnHead]:
    """Two ReLU heads (V, Q, K) and (-V, -Q, K) summing to un-activated attention."""
    v, q, k = list(v), list(q), list(k)
    neg = lambda entries: [(r, c, -x) for r, c, x in entries]
    return [head(dim, v, q, k), head(dim, neg(v), neg(q), k)]


def copy_entries(dst_rows, src_rows, scale: float = 1.0) -> list[Entry]:
    return [(int(d), int(s), scale) for d, s in zip(dst_rows, src_rows)]


class FcBuilder:
    """Accumulates FC units (rows of W1) and their write-back columns (W2)."""

    def __init__(self, dim: int):
        self.dim = dim
        self._w1: list[np.ndarray] = []
        self._w2: list[np.ndarray] = []

    def _unit(self, reads: np.ndarray, writes: np.ndarray):
        self._w1.append(reads.reshape(1, -1))
        self._w2.append(writes.reshape(-1, 1))

    def _vec(self, entries: Iterable[tuple[int, float]]) -> np.ndarray:
        out = np.zeros(self.dim)
        for row, value in entries:
            out[row] += value
        return out

    def add_linear(self, dst: int, terms: Iterable[tuple[int, float]]) -> "FcBuilder":
        """h[dst] += sum value * h[row], exactly."""
        reads = self._vec(terms)
        writes = self._vec([(dst, 1.0)])
        self._unit(reads, writes)
        self._unit(-reads, -writes)
        return self

    def clear(self, rows: Iterable[int]) -> "FcBuilder":
        for row in rows:
            self.add_linear(int(row), [(int(row), -1.0)])
        return self

    def move(self, dst_rows: Iterable[int], src_rows: Iterable[int]) -> "FcBuilder":
        """h[dst] := h[src]."""
        for d, s in zip(dst_rows, src_rows):
            self.add_linear(int(d), [(int(s), 1.0), (int(d), -1.0)])
        return self

    def add_gated(self, dst: int, terms: Iterable[tuple[int, float]], gate_row: int, ones_row: int, g: float) -> "FcBuilder":
        """
        h[dst] += u where h[gate_row] = 1 and nothing where it is 0, with
        u = sum value * h[row] and |u| <= g.
        """
        reads = self._vec(terms)
        shift = self._vec([(gate_row, g), (ones_row, -g)])
        writes = self._vec([(dst, 1.0)])
        self._unit(reads + shift, writes)
        self._unit(-reads + shift, -writes)
        return self

    def add_fit(self, fit: FeatureApprox, input_rows, ones_row: int, output_row: int) -> "FcBuilder":
        w1, w2 = fit.as_fc(self.dim, input_rows, ones_row, output_row)
        self._w1.append(w1)
        self._w2.append(w2)
        return self

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._w1:
            return np.zeros((0, self.dim)), np.zeros((self.dim, 0))
        return np.vstack(self._w1), np.hstack(self._w2)


def make_layer(dim: int, activation: Activation, heads: Optional[list[AttnHead]] = None,
               fc: Optional[FcBuilder] = None, name: str = "") -> Layer:
    w1, w2 = (fc or FcBuilder(dim)).weights()
    return Layer(heads=list(heads or []), activation=activation, fc_w1=w1, fc_w2=w2, name=name)


@lru_cache(maxsize=64)
def cached_fit(target: str, d: int, r_lo: float, r_hi: float, m: int, seed: int, relative: bool = False) -> FeatureApprox:
    """Unit-domain fits are shared by every construction with the same (target, d, m, seed)."""
    return fit_relu_features(target, d, r_lo, r_hi, m, seed, relative)
