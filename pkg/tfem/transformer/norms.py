"""
tfem/transformer/norms.py
Parameter norm and membership in the bounded parameter space.
"""

from dataclasses import dataclass, field

from tfem.linalg.kernels import op_norm
from tfem.transformer.engine import Layer, TransformerParams


def _layer_term(layer: Layer, readouts: float) -> float:
    qk = max((max(op_norm(h.q), op_norm(h.k)) for h in layer.heads), default=0.0)
    values = sum(op_norm(h.v) for h in layer.heads)
    return qk + readouts + values + op_norm(layer.fc_w1) + op_norm(layer.fc_w2)


def param_norm(params: TransformerParams) -> float:
    """
    max over layers of
        max_m max(||Q_m||, ||K_m||) + ||W0|| + ||W1_readout|| + sum_m ||V_m|| + ||W1|| + ||W2||
    with spectral norms throughout. Without layers only the readout norms remain.
    """
    readouts = op_norm(params.readout_left) + op_norm(params.readout_right)
    if not params.layers:
        return readouts
    return max(_layer_term(layer, readouts) for layer in params.layers)


@dataclass
class SpaceVerdict:
    ok: bool
    norm: float
    heads: int
    layers: int
    reasons: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def space_check(params: TransformerParams, b_theta: float, b_m: int, b_l: int) -> SpaceVerdict:
    """True iff param_norm <= b_theta, max heads <= b_m and layer count <= b_l."""
    norm = param_norm(params)
    heads = params.max_heads
    layers = params.layer_count
    reasons = []
    if norm > b_theta:
        reasons.append("norm")
    if heads > b_m:
        reasons.append("heads")
    if layers > b_l:
        reasons.append("layers")
    return SpaceVerdict(ok=not reasons, norm=norm, heads=heads, layers=layers, reasons=reasons)
