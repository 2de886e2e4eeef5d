"""
tfem/construct/report.py
Construction report: what was built, with which constants and fitted errors.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from tfem.construct.layout import ContextLayout


def _plain(value):
    """Recursively convert numpy scalars and tuples for JSON."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


@dataclass
class ConstructionReport:
    kind: str
    k: int
    d: int
    n: int
    tau: int
    m_heads: int
    layer_count: int
    heads_per_layer: list[int]
    beta: float
    layout: ContextLayout
    fit_errors: dict[str, float] = field(default_factory=dict)
    bounds: dict[str, float] = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    # (layer index, cluster) of every head-cancellation selection layer
    selection_layers: list[tuple[int, int]] = field(default_factory=list)
    estep_layers: int = 0
    seed: int = 0
    param_norm: Optional[float] = None

    @property
    def predicted_bound(self) -> float:
        return self.bounds.get("predicted", float("nan"))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["layout"] = self.layout.to_dict()
        return _plain(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        """Short stable fingerprint of the report, written next to sweep rows."""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:12]
