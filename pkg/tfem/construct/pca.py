"""
tfem/construct/pca.py
ReLU-attention transformer running power iteration with deflation.

Layers: 1 covariance layer, 2 per power step (tau in total, split over the
k vectors), 4 per vector to store the estimate and deflate: 1 + 2 tau + 4k.
Linear attention is realized by head pairs (V, Q, K) and (-V, -Q, K).

The covariance is held in column form (token j carries A[:, j]); the current
vector in row form (token i carries v_i). A broadcast scalar c multiplies a
row-form quantity through a head with constant value and q_i = c / N.

    power step:   v <- A v / (hi * ||v||)
    deflation:    A <- A - (A v)(A v)^T / (v^T A v)
"""

import logging
import math
from typing import Optional

import numpy as np

from tfem.approx.features import MIN_RELU_ATOMS
from tfem.classical.power import DeflationResult, deflation_bound
from tfem.config.settings import Defaults
from tfem.construct.blocks import FcBuilder, cached_fit, copy_entries, linear_pair, make_layer
from tfem.construct.layout import ContextLayout, build_pca_context, pca_layout
from tfem.construct.report import ConstructionReport
from tfem.errors import ConditioningError, ParameterError, ShapeError
from tfem.linalg.kernels import as_mat, jacobi_eigh, l2
from tfem.transformer.engine import Activation, Layer, TransformerParams, tf_forward
from tfem.transformer.norms import param_norm

logger = logging.getLogger(__name__)


def tau_split(tau: int, k: int) -> list[int]:
    """
    Power steps per vector. Each vector gets one step; the remaining tau - k
    are shared in proportion to 2k - c for vector c (largest remainder, ties
    to the earlier vector).

    With tau < k the first tau vectors get one step each.
    """
    if tau < k:
        return [1] * tau + [0] * (k - tau)
    weights = np.array([2 * k - c for c in range(k)], dtype=np.float64)
    share = (tau - k) * weights / weights.sum()
    steps = np.floor(share).astype(int)
    order = np.argsort(-(share - steps), kind="stable")
    steps[order[: (tau - k) - int(steps.sum())]] += 1
    return [int(s) + 1 for s in steps]


def normalization_ranges(d: int, lo: float, hi: float) -> dict[str, tuple[float, float]]:
    """
    Domains of the three fitted scalar maps, from the eigenvalue range and
    the start-vector correlation floor.
    """
    corr = Defaults.PCA_CORRELATION / math.sqrt(d)
    mag_lo, mag_hi = (lo / hi) * corr / 2.0, 2.0
    return {
        "gram": (mag_lo ** 2, mag_hi ** 2),
        "rho": (lo * (mag_lo * corr) ** 2 / 2.0, 2.0 * hi * mag_hi ** 2),
        "norm2": ((lo * mag_lo * corr / 2.0) ** 2, (2.0 * hi * mag_hi) ** 2),
    }


def _scalar_fit(target: str, span: tuple[float, float], m: int, seed: int):
    lo, hi = span
    return cached_fit(target, 1, lo / hi, 1.0, m, seed, True).scaled(hi)


def _apply_pair(layout: ContextLayout) -> list:
    """yrow_j += sum_i work_i A[j, i]."""
    d = len(layout.rows("cov"))
    return linear_pair(
        layout.dim,
        v=[(layout.row("yrow"), layout.row("work"), 1.0)],
        q=[(r, layout.row("cov", r), 1.0) for r in range(d)],
        k=[(r, layout.row("p2", r), 1.0) for r in range(d)],
    )


def _inner_pair(layout: ContextLayout, dst: int, a: int, b: int) -> list:
    """h[dst] += sum_i h[a, i] h[b, i], broadcast."""
    return linear_pair(layout.dim, v=[(dst, a, 1.0)], q=[(0, b, 1.0)], k=[(0, layout.row("ones"), 1.0)])


def _scale_pair(layout: ContextLayout, dst: int, scalar_terms, src: int, n: int) -> list:
    """h[dst, j] += (sum value * h[row]) * h[src, j] for a broadcast scalar."""
    return linear_pair(
        layout.dim,
        v=[(dst, layout.row("ones"), 1.0)],
        q=[(0, row, value / n) for row, value in scalar_terms],
        k=[(0, src, 1.0)],
    )


def build_pca_tf(d: int, k: int, tau_power: int, m_heads: int, seed: int = 0, *,
                 eig_range: tuple[float, float] = (1.0, 10.0), n: Optional[int] = None):
    """
    Args:
        d, k: data dimension and number of eigenvectors
        tau_power: total power steps
        m_heads: random atoms of each fitted normalization
        eig_range: (lo, hi) bounds on the eigenvalues in play
        n: token count of the inputs (default d)

    Returns:
        (TransformerParams, ConstructionReport); the readout is the kd-vector
        of stacked unit estimates.
    """
    n = d if n is None else n
    lo, hi = map(float, eig_range)
    if not 1 <= k <= d:
        raise ParameterError(f"need 1 <= k <= d, got k={k}, d={d}")
    if n < d:
        raise ParameterError(f"need N >= d tokens, got N={n}, d={d}")
    if tau_power < 1:
        raise ParameterError(f"tau_power must be >= 1, got {tau_power}")
    if m_heads < MIN_RELU_ATOMS:
        raise ParameterError(f"m_heads must be >= {MIN_RELU_ATOMS}, got {m_heads}")
    if not 0.0 < lo <= hi:
        raise ParameterError(f"eig_range must satisfy 0 < lo <= hi, got {eig_range}")

    layout = pca_layout(k, d)
    dim = layout.dim
    ones, work, yrow, yhat = (layout.row(name) for name in ("ones", "work", "yrow", "yhat"))
    gram, norm2, inv, invn = (layout.row(name) for name in ("gram", "norm2", "inv", "invn"))

    ranges = normalization_ranges(d, lo, hi)
    gram_fit = _scalar_fit("inv_sqrt", ranges["gram"], m_heads, seed)
    rho_fit = _scalar_fit("inv_scalar", ranges["rho"], m_heads, seed)
    norm_fit = _scalar_fit("inv_sqrt", ranges["norm2"], m_heads, seed)

    cov_heads = linear_pair(
        dim,
        v=copy_entries(layout.rows("cov"), layout.rows("data")),
        q=[(r, layout.row("data", r), 1.0) for r in range(d)],
        k=[(r, layout.row("p2", r), 1.0) for r in range(d)],
    )
    load = FcBuilder(dim).add_linear(work, [(layout.row("p3", 0), 1.0)])
    layers: list[Layer] = [make_layer(dim, Activation.RELU, cov_heads, load, name="covariance")]

    steps = tau_split(tau_power, k)
    for c in range(k):
        for step in range(steps[c]):
            fc = FcBuilder(dim).add_fit(gram_fit, [gram], ones, inv).clear([gram])
            heads = _apply_pair(layout) + _inner_pair(layout, gram, work, work)
            layers.append(make_layer(dim, Activation.RELU, heads, fc, name=f"v{c} power {step} apply"))

            fc = FcBuilder(dim).move([work], [yrow]).clear([yrow, inv])
            heads = _scale_pair(layout, yrow, [(inv, 1.0 / hi), (ones, -1.0)], yrow, n)
            layers.append(make_layer(dim, Activation.RELU, heads, fc, name=f"v{c} power {step} scale"))

        est = layout.rows("est")[c * d:(c + 1) * d]
        layers.append(make_layer(dim, Activation.RELU, _apply_pair(layout), name=f"v{c} store apply"))

        fc = FcBuilder(dim).add_fit(rho_fit, [gram], ones, inv).add_fit(norm_fit, [norm2], ones, invn)
        heads = _inner_pair(layout, gram, yrow, work) + _inner_pair(layout, norm2, yrow, yrow)
        layers.append(make_layer(dim, Activation.RELU, heads, fc, name=f"v{c} store measure"))

        heads = _scale_pair(layout, yhat, [(inv, 1.0)], yrow, n) + linear_pair(
            dim, v=copy_entries(est, layout.rows("p2")), q=[(0, yrow, 1.0)], k=[(0, invn, 1.0)],
        )
        layers.append(make_layer(dim, Activation.RELU, heads, name=f"v{c} store scale"))

        deflate = linear_pair(
            dim,
            v=[(layout.row("cov", r), layout.row("p2", r), -1.0) for r in range(d)],
            q=[(0, yrow, 1.0)],
            k=[(0, yhat, 1.0)],
        )
        fc = FcBuilder(dim).clear([yrow, yhat, gram, norm2, inv, invn, work])
        if c + 1 < k:
            fc.add_linear(work, [(layout.row("p3", c + 1), 1.0)])
        heads = deflate + _inner_pair(layout, layout.row("eig", c), yrow, yhat)
        layers.append(make_layer(dim, Activation.RELU, heads, fc, name=f"v{c} deflate"))

    left = np.zeros((k * d, dim))
    left[:, layout.block("est")] = np.eye(k * d)
    right = np.zeros((n, 1))
    right[0, 0] = 1.0
    params = TransformerParams(layers=layers, readout_left=left, readout_right=right)
    if params.layer_count != 1 + 2 * tau_power + 4 * k:
        raise ShapeError(f"built {params.layer_count} layers, expected {1 + 2 * tau_power + 4 * k}")

    rel = {"gram": gram_fit.measured_rel_error, "rho": rho_fit.measured_rel_error, "norm2": norm_fit.measured_rel_error}
    eps = max(rel.values())
    report = ConstructionReport(
        kind="pca", k=k, d=d, n=n, tau=tau_power, m_heads=m_heads,
        layer_count=params.layer_count, heads_per_layer=[len(layer.heads) for layer in layers],
        beta=0.0, layout=layout,
        fit_errors={f"{name}_rel": value for name, value in rel.items()},
        bounds={
            "deflation_residual": hi * rel["rho"],
            "head_indicator": hi ** d / max(eps, 1e-300) ** 2,
        },
        constants={"tau_split": steps, "eig_range": [lo, hi],
                   "ranges": {name: list(span) for name, span in ranges.items()}},
        seed=seed, param_norm=param_norm(params),
    )
    report.constants["heads_sufficient"] = m_heads >= report.bounds["head_indicator"]
    logger.debug("built pca: %d layers, D=%d, split %s, eps %.3e", report.layer_count, dim, steps, eps)
    return params, report


def decode_estimates(output, d: int, k: int) -> np.ndarray:
    """kd x 1 readout -> d x k matrix of estimates."""
    out = as_mat(output, "output")
    if out.shape != (k * d, 1):
        raise ShapeError(f"expected a {k * d} x 1 readout, got {out.shape}")
    return out[:, 0].reshape(k, d).T


def spectral_range(x, k: int) -> tuple[float, float]:
    """(lambda_k, lambda_1) of X X^T, the normalization range a construction needs."""
    values, _ = jacobi_eigh(x @ x.T)
    if values[k - 1] <= 0.0:
        raise ConditioningError(f"lambda_{k} = {values[k - 1]:.3e} is not positive")
    return float(values[k - 1]), float(values[0])


def run_pca_construction(x, k: int, tau_power: int, m_heads: int, seed: int = 0):
    """
    Build the context and the transformer for data x, run it, and read back
    the estimates and the eigenvalue block.

    Returns:
        (vectors d x k, eigenvalues k, params, report, starts)
    """
    x = as_mat(x, "x")
    d, n = x.shape
    h, layout, starts = build_pca_context(x, k, seed)
    params, report = build_pca_tf(d, k, tau_power, m_heads, seed, eig_range=spectral_range(x, k), n=n)
    output, states = tf_forward(params, h, trace=True)
    eigs = states[-1][layout.block("eig"), 0].copy()
    return decode_estimates(output, d, k), eigs, params, report, starts


def estimate_quality(a, vectors: np.ndarray) -> DeflationResult:
    """
    Normalized estimates with the deflation quantities (one-step change,
    Rayleigh residual) measured on the exactly deflated matrices.
    """
    a = as_mat(a, "a")
    current = a.copy()
    k = vectors.shape[1]
    vecs = vectors / np.linalg.norm(vectors, axis=0)
    vals = np.zeros(k)
    deltas, residuals = [], []
    floor = np.finfo(np.float64).eps * max(1.0, float(np.abs(a).max()))
    for c in range(k):
        v = vecs[:, c]
        y = current @ v
        lam = l2(y)
        nxt = y / lam if lam > 0.0 else v
        deltas.append(min(l2(nxt - v), l2(nxt + v)))
        residuals.append(max(l2(y - float(v @ y) * v), floor))
        vals[c] = lam
        current = current - lam * np.outer(v, v)
    return DeflationResult(eigvecs=vecs, eigvals=vals, deltas=deltas, residuals=residuals)


def estimate_bound(a, vectors: np.ndarray, true_values) -> float:
    """Deflation error bound instantiated with the measured quantities of the estimates."""
    return deflation_bound(estimate_quality(a, vectors), np.asarray(true_values, dtype=np.float64))
