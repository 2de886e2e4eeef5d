"""
tfem/construct/em.py
Transformers whose weights are set by hand to run Lloyd rounds on the
context-augmented input.

Each round is an E-step block (centroids from the current soft assignments)
followed by k M-step blocks (distance of every point to centroid l) whose last
attention turns the negated distances into new assignments.

    TF   : softmax attention, 3 + 3k layers per round
    TF+  : 7 activation-free E-step layers with Newton reciprocal refinement,
           then the same 3k M-step layers
"""

import logging
import math
from typing import Optional

import numpy as np

from tfem.approx.features import MIN_RELU_ATOMS
from tfem.config.settings import Defaults, debug
from tfem.construct.audit import audit_selection_layers
from tfem.construct.blocks import FcBuilder, cached_fit, copy_entries, head, make_layer
from tfem.construct.layout import ContextLayout, build_context, diff_rows, em_layout
from tfem.construct.report import ConstructionReport
from tfem.errors import FitError, ParameterError, ShapeError
from tfem.gmm.instance import GmmInstance
from tfem.linalg.kernels import as_mat
from tfem.transformer.engine import Activation, Layer, TransformerParams, tf_forward
from tfem.transformer.norms import param_norm

logger = logging.getLogger(__name__)


def default_beta(n: int) -> float:
    return Defaults.BETA_SCALE * math.log(n)


def _check_args(k: int, d: int, n: int, tau: int, m_heads: int, beta: float, radius: float):
    if not 2 <= k < d:
        raise ParameterError(f"constructions need 2 <= k < d, got k={k}, d={d}")
    if n <= max(k, d):
        raise ParameterError(f"need N > max(k, d), got N={n}")
    if tau < 1:
        raise ParameterError(f"tau must be >= 1, got {tau}")
    if m_heads < MIN_RELU_ATOMS:
        raise ParameterError(f"m_heads must be >= {MIN_RELU_ATOMS}, got {m_heads}")
    if not beta > 0.0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    if not radius > 0.0:
        raise ParameterError(f"radius must be > 0, got {radius}")


# ================================
# E-step blocks
# ================================

def _gate_centroids(fc: FcBuilder, layout: ContextLayout, k: int, d: int, g: float) -> FcBuilder:
    """cent[:, l] := diff_l on token l, untouched elsewhere."""
    ones = layout.row("ones")
    cent = layout.rows("cent")
    for cluster in range(k):
        diff = diff_rows(layout, cluster, d)
        gate = layout.row("p2", cluster)
        for r in range(d):
            fc.add_gated(int(cent[r]), [(int(diff[r]), 1.0), (int(cent[r]), -1.0)], gate, ones, g)
    return fc


def _estep_softmax(layout: ContextLayout, k: int, d: int, n: int, radius: float, tag: str) -> list[Layer]:
    dim = layout.dim
    ones = layout.row("ones")
    beta_e = Defaults.ESTEP_SCALE * math.log(n)
    heads = [
        head(
            dim,
            v=copy_entries(diff_rows(layout, cluster, d), layout.rows("data")),
            q=[(0, layout.row("p1", cluster), beta_e)],
            k=[(0, ones, 1.0)],
        )
        for cluster in range(k)
    ]
    gate = _gate_centroids(FcBuilder(dim), layout, k, d, 4.0 * radius + 1.0)
    return [
        make_layer(dim, Activation.SOFTMAX, heads, name=f"{tag} E average"),
        make_layer(dim, Activation.SOFTMAX, fc=gate, name=f"{tag} E gate"),
        make_layer(dim, Activation.SOFTMAX, fc=FcBuilder(dim).clear(layout.rows("diff")), name=f"{tag} E clear"),
    ]


def _estep_newton(layout: ContextLayout, k: int, d: int, n: int, radius: float, inv_fit, tag: str) -> list[Layer]:
    """
    Counts n_l by un-normalized attention, y_l ~ 1/n_l from a fitted reciprocal,
    NEWTON_STEPS refinements y <- 2y - n y^2, then mu_l = y_l * sum_i p1[l, i] x_i.
    """
    dim = layout.dim
    ones = layout.row("ones")
    count = head(dim, v=copy_entries(layout.rows("cnt"), layout.rows("p1")), q=[(0, ones, 1.0)], k=[(0, ones, 1.0)])
    recip = FcBuilder(dim)
    for cluster in range(k):
        recip.add_fit(inv_fit, [layout.row("cnt", cluster)], ones, layout.row("newp", cluster))
    layers = [make_layer(dim, Activation.NONE, [count], recip, name=f"{tag} E count")]

    newton = [
        head(
            dim,
            v=[(layout.row("newp", c), layout.row("newp", c), 1.0)],
            q=[(0, ones, 1.0 / n), (1, layout.row("cnt", c), -1.0 / n)],
            k=[(0, ones, 1.0), (1, layout.row("newp", c), 1.0)],
        )
        for c in range(k)
    ]
    for step in range(Defaults.NEWTON_STEPS):
        layers.append(make_layer(dim, Activation.NONE, newton, name=f"{tag} E newton {step}"))

    average = [
        head(
            dim,
            v=copy_entries(diff_rows(layout, c, d), layout.rows("data")),
            q=[(0, layout.row("p1", c), 1.0)],
            k=[(0, layout.row("newp", c), 1.0)],
        )
        for c in range(k)
    ]
    gate = _gate_centroids(FcBuilder(dim), layout, k, d, 4.0 * radius + 1.0)
    layers.append(make_layer(dim, Activation.NONE, average, gate, name=f"{tag} E average"))
    cleanup = FcBuilder(dim).clear(layout.rows("diff")).clear(layout.rows("newp")).clear(layout.rows("cnt"))
    layers.append(make_layer(dim, Activation.NONE, fc=cleanup, name=f"{tag} E clear"))
    return layers


# ================================
# M-step blocks
# ================================

def _mstep(layout: ContextLayout, k: int, d: int, n: int, beta: float, norm_fit, bias: float,
           tag: str, first_index: int) -> tuple[list[Layer], list[tuple[int, int]]]:
    dim = layout.dim
    ones = layout.row("ones")
    beta_sel = math.log(n)
    e = math.exp(beta_sel)
    # scored head weights e at token l and 1 elsewhere; subtracting the uniform head leaves column l
    c_scored = (e + n - 1.0) / (e - 1.0)
    c_uniform = -n / (e - 1.0)

    layers: list[Layer] = []
    selections = []
    for cluster in range(k):
        diff = diff_rows(layout, cluster, d)
        pair = [
            head(dim, v=copy_entries(diff, layout.rows("cent"), c_scored),
                 q=[(0, layout.row("p2", cluster), beta_sel)], k=[(0, ones, 1.0)]),
            head(dim, v=copy_entries(diff, layout.rows("cent"), c_uniform)),
        ]
        centre = FcBuilder(dim)
        for r in range(d):
            centre.add_linear(int(diff[r]), [(layout.row("data", r), 1.0), (int(diff[r]), -2.0)])
        selections.append((first_index + len(layers), cluster))
        layers.append(make_layer(dim, Activation.SOFTMAX, pair, centre, name=f"{tag} M{cluster} select"))

        measure = FcBuilder(dim).add_fit(norm_fit, diff, ones, layout.row("dist", cluster))
        layers.append(make_layer(dim, Activation.SOFTMAX, fc=measure, name=f"{tag} M{cluster} norm"))

        if cluster < k - 1:
            layers.append(make_layer(dim, Activation.SOFTMAX, fc=FcBuilder(dim).clear(diff), name=f"{tag} M{cluster} clear"))
            continue

        # scores on cluster token r: beta * (bias - dist_r); the other tokens score 0 and carry no value
        assign = head(
            dim,
            v=copy_entries(layout.rows("newp"), layout.rows("p2")[:k]),
            q=[(r, layout.row("p2", r), 1.0) for r in range(k)],
            k=[(r, ones, beta * bias) for r in range(k)] + [(r, layout.row("dist", r), -beta) for r in range(k)],
        )
        finish = (
            FcBuilder(dim)
            .move(layout.rows("p1"), layout.rows("newp"))
            .clear(layout.rows("newp"))
            .clear(layout.rows("dist"))
            .clear(diff)
        )
        layers.append(make_layer(dim, Activation.SOFTMAX, [assign], finish, name=f"{tag} M assign"))
    return layers, selections


# ================================
# Builders
# ================================

def _build(k, d, n, tau, m_heads, beta, radius, seed, fit_budget, plus: bool):
    beta = default_beta(n) if beta is None else float(beta)
    _check_args(k, d, n, tau, m_heads, beta, radius)
    layout = em_layout(k, d)

    r_fit = 2.0 * radius
    norm_fit = cached_fit("norm", d, 0.0, 1.0, m_heads, seed).scaled(r_fit)
    if fit_budget is not None and norm_fit.measured_sup_error > fit_budget:
        raise FitError(f"norm fit error {norm_fit.measured_sup_error:.3e} exceeds budget {fit_budget:.3e}")
    bias = r_fit + 1.0 + norm_fit.measured_sup_error

    inv_fit = None
    if plus:
        inv_fit = cached_fit("inv_scalar", 1, 1.0 / n, 1.0, m_heads, seed, True).scaled(float(n))
        if not inv_fit.measured_rel_error < 1.0:
            raise FitError(f"reciprocal fit relative error {inv_fit.measured_rel_error:.3e} is too large for Newton refinement")

    layers: list[Layer] = []
    selections: list[tuple[int, int]] = []
    for t in range(tau):
        tag = f"round {t}"
        if plus:
            layers += _estep_newton(layout, k, d, n, radius, inv_fit, tag)
        else:
            layers += _estep_softmax(layout, k, d, n, radius, tag)
        mstep, sel = _mstep(layout, k, d, n, beta, norm_fit, bias, tag, len(layers))
        layers += mstep
        selections += sel

    left = np.zeros((k, layout.dim))
    left[:, layout.block("p1")] = np.eye(k)
    params = TransformerParams(layers=layers, readout_left=left, readout_right=np.eye(n))

    per_round = 7 + 3 * k if plus else 3 + 3 * k
    if params.layer_count != tau * per_round:
        raise ShapeError(f"built {params.layer_count} layers, expected {tau * per_round}")

    bounds = {
        "norm": norm_fit.measured_sup_error,
        "assignment_leak": (n - k) * math.exp(-beta),
    }
    constants = {
        "beta_select": math.log(n),
        "bias": bias,
        "gate": 4.0 * radius + 1.0,
        "radius": radius,
        "fit_radius": r_fit,
    }
    fit_errors = {"norm": norm_fit.measured_sup_error}
    if plus:
        rel = inv_fit.measured_rel_error
        bounds["estep"] = 2.0 * radius * rel ** (2 ** Defaults.NEWTON_STEPS)
        bounds["estep_target"] = float(n) ** -Defaults.TFPLUS_TARGET_C
        constants.update(newton_steps=Defaults.NEWTON_STEPS, theory_c=Defaults.TFPLUS_THEORY_C,
                         target_c=Defaults.TFPLUS_TARGET_C)
        fit_errors["inv_scalar_rel"] = rel
    else:
        constants["beta_estep"] = Defaults.ESTEP_SCALE * math.log(n)
        bounds["estep"] = 2.0 * radius / n
    bounds["predicted"] = tau * (bounds["estep"] + 2.0 * bounds["norm"] + bounds["assignment_leak"])

    report = ConstructionReport(
        kind="em_plus" if plus else "em", k=k, d=d, n=n, tau=tau, m_heads=m_heads,
        layer_count=params.layer_count, heads_per_layer=[len(layer.heads) for layer in layers],
        beta=beta, layout=layout, fit_errors=fit_errors, bounds=bounds, constants=constants,
        selection_layers=selections, estep_layers=7 if plus else 3, seed=seed,
        param_norm=param_norm(params),
    )
    logger.debug("built %s: %d layers, D=%d, norm fit %.3e", report.kind, report.layer_count, layout.dim, fit_errors["norm"])
    return params, report


def build_em_tf(k: int, d: int, n: int, tau: int, m_heads: int, beta: Optional[float] = None, *,
                radius: float = 1.0, seed: int = 0, fit_budget: Optional[float] = None):
    """
    Softmax-attention transformer with tau * (3 + 3k) layers running tau Lloyd rounds.

    Args:
        k, d, n: clusters, data dimension and token count of the inputs it will see
        m_heads: random atoms in each fitted norm block
        beta: assignment temperature, default 50 ln N
        radius: bound on the data norms
        seed: feature seed of the fitted blocks
        fit_budget: optional ceiling on the fitted norm's sup error

    Returns:
        (TransformerParams, ConstructionReport)
    """
    return _build(k, d, n, tau, m_heads, beta, radius, seed, fit_budget, plus=False)


def build_em_tf_plus(k: int, d: int, n: int, tau: int, m_heads: int, beta: Optional[float] = None, *,
                     radius: float = 1.0, seed: int = 0, fit_budget: Optional[float] = None):
    """Same rounds with the activation-free E-step: tau * (7 + 3k) layers."""
    return _build(k, d, n, tau, m_heads, beta, radius, seed, fit_budget, plus=True)


def em_construction_for(instance: GmmInstance, tau: int, m_heads: int, beta: Optional[float] = None,
                        plus: bool = False, seed: int = 0, fit_budget: Optional[float] = None):
    builder = build_em_tf_plus if plus else build_em_tf
    radius = max(instance.radius, 1e-12)
    return builder(instance.k, instance.d, instance.n, tau, m_heads, beta, radius=radius, seed=seed, fit_budget=fit_budget)


def extract_assignments(output) -> np.ndarray:
    """Column-wise argmax of a k x N output; ties go to the lowest index."""
    return np.argmax(as_mat(output, "output"), axis=0)


def run_em_construction(instance: GmmInstance, init_labels, init_centroids, tau: int, m_heads: int,
                        beta: Optional[float] = None, plus: bool = False, seed: int = 0):
    """
    Build, run and decode one construction on one instance.

    Returns:
        (labels, output, params, report, h)
    """
    params, report = em_construction_for(instance, tau, m_heads, beta, plus, seed)
    h, _ = build_context(instance, init_labels, init_centroids)
    if debug():
        audit_selection_layers(params, report, h)
    output = tf_forward(params, h)
    return extract_assignments(output), output, params, report, h
