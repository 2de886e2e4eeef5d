"""
tfem/transformer/engine.py
Forward pass for attention + FC transformers with a per-layer activation tag.

A layer maps the D x N hidden state H to

    H' = H + sum_m (V_m H) act((Q_m H)^T (K_m H))
    out = H' + W2 relu(W1 H')

where act is the column-wise softmax, the entrywise ReLU, or the identity.
Scores are not scaled by 1/sqrt(D).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from tfem.errors import ShapeError
from tfem.linalg.kernels import relu, softmax_cols

logger = logging.getLogger(__name__)


class Activation(Enum):
    """Attention activation of a layer"""
    SOFTMAX = "softmax"
    RELU = "relu"
    NONE = "none"


@dataclass(frozen=True)
class AttnHead:
    v: np.ndarray
    q: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        shapes = {self.v.shape, self.q.shape, self.k.shape}
        if len(shapes) != 1 or self.v.ndim != 2 or self.v.shape[0] != self.v.shape[1]:
            raise ShapeError(f"head matrices must share one square shape, got {sorted(shapes)}")

    @property
    def dim(self) -> int:
        return self.v.shape[0]


@dataclass
class Layer:
    """Attention heads sharing one activation, followed by a ReLU FC block (hidden width D')."""

    heads: list[AttnHead]
    activation: Activation
    fc_w1: np.ndarray
    fc_w2: np.ndarray
    name: str = ""

    @classmethod
    def empty(cls, dim: int, activation: Activation = Activation.SOFTMAX, name: str = "") -> "Layer":
        return cls(heads=[], activation=activation, fc_w1=np.zeros((0, dim)), fc_w2=np.zeros((dim, 0)), name=name)

    @property
    def dim(self) -> int:
        return self.fc_w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.fc_w1.shape[0]


@dataclass
class TransformerParams:
    layers: list[Layer] = field(default_factory=list)
    readout_left: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    readout_right: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def dim(self) -> int:
        return self.readout_left.shape[1]

    @property
    def layer_count(self) -> int:
        return len(self.layers)

    @property
    def max_heads(self) -> int:
        return max((len(layer.heads) for layer in self.layers), default=0)


def _activate(scores: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.SOFTMAX:
        return softmax_cols(scores)
    if activation is Activation.RELU:
        return relu(scores)
    return scores


def layer_forward(layer: Layer, h: np.ndarray) -> np.ndarray:
    """One attention block plus its FC block, both residual."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2:
        raise ShapeError(f"hidden state must be 2-D, got {h.ndim}-D")
    dim = h.shape[0]
    if layer.dim != dim or layer.fc_w2.shape != (dim, layer.hidden):
        raise ShapeError(f"layer expects D={layer.dim}, hidden state has D={dim}")

    out = h.copy()
    for m, head in enumerate(layer.heads):
        if head.dim != dim:
            raise ShapeError(f"head {m} expects D={head.dim}, hidden state has D={dim}")
        scores = (head.q @ h).T @ (head.k @ h)
        out += (head.v @ h) @ _activate(scores, layer.activation)

    if layer.hidden:
        out = out + layer.fc_w2 @ relu(layer.fc_w1 @ out)
    return out


def tf_forward(params: TransformerParams, h: np.ndarray, trace: bool = False):
    """
    Run every layer, then apply readout_left . H_L . readout_right.

    Returns:
        the d1 x d2 readout, or (readout, [H_0, ..., H_L]) when trace is set
    """
    state = np.asarray(h, dtype=np.float64)
    states = [state] if trace else None
    for index, layer in enumerate(params.layers):
        try:
            state = layer_forward(layer, state)
        except ShapeError as e:
            raise ShapeError(f"layer {index} ({layer.name or layer.activation.value}): {e.message}")
        if trace:
            states.append(state)

    if params.readout_left.shape[1] != state.shape[0]:
        raise ShapeError(f"readout_left has {params.readout_left.shape[1]} columns, D={state.shape[0]}")
    if params.readout_right.shape[0] != state.shape[1]:
        raise ShapeError(f"readout_right has {params.readout_right.shape[0]} rows, N={state.shape[1]}")
    result = params.readout_left @ state @ params.readout_right
    return (result, states) if trace else result
