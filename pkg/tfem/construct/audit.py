"""
tfem/construct/audit.py
Checks run against the hidden states of a construction, layer by layer.
"""

import logging

import numpy as np

from tfem.config.settings import Defaults
from tfem.construct.layout import diff_rows
from tfem.construct.report import ConstructionReport
from tfem.errors import ConstructionError, ShapeError
from tfem.linalg.kernels import as_mat
from tfem.transformer.engine import TransformerParams, layer_forward

logger = logging.getLogger(__name__)


def audit_selection_layers(params: TransformerParams, report: ConstructionReport, h) -> list[float]:
    """
    Run the construction on H and check that after every selection layer
    diff_l equals data - cent[:, l] on every token.

    Returns:
        the max deviation per selection layer

    Raises:
        ConstructionError: when a deviation exceeds CANCELLATION_TOL * max |H|
    """
    state = as_mat(h, "h")
    if state.shape[0] != params.dim:
        raise ShapeError(f"hidden state has D={state.shape[0]}, construction expects D={params.dim}")
    layout, d = report.layout, report.d
    pending = dict(report.selection_layers)
    deviations = []
    for index, layer in enumerate(params.layers):
        state = layer_forward(layer, state)
        if index not in pending:
            continue
        cluster = pending[index]
        expected = state[layout.block("data")] - state[layout.rows("cent")[:, None], cluster]
        deviation = float(np.abs(state[diff_rows(layout, cluster, d)] - expected).max())
        scale = max(1.0, float(np.abs(state).max()))
        if deviation > Defaults.CANCELLATION_TOL * scale:
            raise ConstructionError(
                f"selection layer {index} ({layer.name}) for cluster {cluster} is off by {deviation:.3e}"
            )
        deviations.append(deviation)
    logger.debug("selection audit: %d layers, worst %.3e", len(deviations), max(deviations, default=0.0))
    return deviations


def estep_fidelity(params: TransformerParams, report: ConstructionReport, h, lloyd_centroids) -> float:
    """Max entry error of cent[:, :k] after the first E-step against the Lloyd centroids."""
    state = as_mat(h, "h")
    expected = as_mat(lloyd_centroids, "lloyd_centroids")
    if expected.shape != (report.d, report.k):
        raise ShapeError(f"lloyd_centroids must be {report.d} x {report.k}, got {expected.shape}")
    for layer in params.layers[:report.estep_layers]:
        state = layer_forward(layer, state)
    got = state[report.layout.block("cent"), :report.k]
    return float(np.abs(got - expected).max())
