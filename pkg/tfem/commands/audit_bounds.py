"""
tfem/commands/audit_bounds.py
Bound audits: hardmax gap, ReLU- and softmax-feature decay, EM construction fidelity
and PCA bound instantiation. Every violation is one CSV row.
"""

import logging
import os

import numpy as np
import pandas as pd

from tfem.approx.features import decay_audit, softmax_decay_audit
from tfem.approx.hardmax import audit_hardmax
from tfem.classical.lloyd import lloyd
from tfem.classical.spectral import spectral_init
from tfem.commands.config import AuditConfig
from tfem.commands.pca import random_spd_data
from tfem.construct.audit import audit_selection_layers, estep_fidelity
from tfem.construct.em import em_construction_for
from tfem.construct.layout import build_context
from tfem.construct.pca import estimate_bound, run_pca_construction
from tfem.errors import ConstructionError
from tfem.gmm.instance import generate_instance, one_hot
from tfem.gmm.metrics import perm_loss
from tfem.linalg.kernels import jacobi_eigh
from tfem.transformer.engine import tf_forward
from tfem.utils.report_writer import write_csv

logger = logging.getLogger(__name__)

VIOLATION_COLUMNS = ["check", "case", "value", "bound", "detail"]
SUMMARY_COLUMNS = ["check", "cases", "violations", "worst"]
DECAY_SLOPE = -1.0 / 6.0
ASSIGN_LOSS = 0.05
SOFTMAX_DECAY_MAX_M = 1024
REFERENCE_FACTOR = 3.0


class AuditLedger:
    """Collects violation rows and one summary row per check."""

    def __init__(self):
        self.violations: list[dict] = []
        self.summary: list[dict] = []

    def record(self, check: str, cases: int, worst: float, violations: list[dict]):
        self.violations.extend({"check": check, **v} for v in violations)
        self.summary.append({"check": check, "cases": cases, "violations": len(violations), "worst": worst})
        marker = "✓" if not violations else "✗"
        print(f"{marker} {check}: {cases} case(s), {len(violations)} violation(s), worst {worst:.4g}")


def _hardmax(config: AuditConfig, ledger: AuditLedger):
    audit = audit_hardmax(config.draws, config.d_max, config.beta_range, config.seed)
    rows = [
        {"case": v["draw"], "value": v["gap"], "bound": v["bound"], "detail": f"d={v['d']} beta={v['beta']:.6g}"}
        for v in audit.violations
    ]
    ledger.record("hardmax", audit.draws, audit.worst_ratio, rows)


def _decay(config: AuditConfig, ledger: AuditLedger):
    audit = decay_audit("inv_scalar", 1, 1.0, 10.0, config.decay_ms, config.seed)
    rows = []
    errors = " ".join(f"{m}:{e:.3e}" for m, e in zip(audit.ms, audit.errors))
    if not audit.slope < DECAY_SLOPE:
        rows.append({"case": 0, "value": audit.slope, "bound": DECAY_SLOPE, "detail": errors})
    # a 64-fold increase in m must cut the error by at least 4
    if audit.ms[-1] >= 64 * audit.ms[0] and audit.errors[-1] >= audit.errors[0] / 4.0:
        rows.append({"case": 1, "value": audit.errors[-1], "bound": audit.errors[0] / 4.0, "detail": errors})
    ledger.record("relu_decay", len(audit.ms), audit.slope, rows)


def _softmax_decay(config: AuditConfig, ledger: AuditLedger):
    ms = [m for m in config.decay_ms if m <= SOFTMAX_DECAY_MAX_M]
    if len(ms) < 2:
        print(f"⚠ softmax_decay skipped: needs two atom counts <= {SOFTMAX_DECAY_MAX_M}")
        return
    audit = softmax_decay_audit(lambda x: x, 2, 2, 1.0, ms, config.seed, name="identity")
    rows = []
    errors = " ".join(f"{m}:{e:.3e}" for m, e in zip(audit.ms, audit.errors))
    if not audit.slope < 0.0:
        rows.append({"case": 0, "value": audit.slope, "bound": 0.0, "detail": errors})
    if not audit.within_reference(REFERENCE_FACTOR):
        envelope = REFERENCE_FACTOR * audit.errors[0] * audit.reference[-1] / audit.reference[0]
        rows.append({"case": 1, "value": audit.errors[-1], "bound": envelope, "detail": errors})
    ledger.record("softmax_decay", len(audit.ms), audit.slope, rows)


def _em(config: AuditConfig, ledger: AuditLedger):
    selection, estep, assign = [], [], []
    worst = {"selection": 0.0, "estep": 0.0, "assign": 0.0}
    for case in range(config.em_instances):
        inst = generate_instance(k=2, d=5, per_cluster=50, delta=8.0, sigma=1.0, seed=config.seed + case)
        _, centroids = spectral_init(inst.x, 2, config.seed + case)
        trace = lloyd(inst.x, centroids, tau=1)
        h, _ = build_context(inst, trace.assignments[0], centroids)
        params, report = em_construction_for(inst, tau=1, m_heads=config.m_heads)

        try:
            worst["selection"] = max(worst["selection"], max(audit_selection_layers(params, report, h), default=0.0))
        except ConstructionError as e:
            selection.append({"case": case, "value": float("nan"), "bound": 0.0, "detail": e.message})

        error = estep_fidelity(params, report, h, trace.centroids[1])
        worst["estep"] = max(worst["estep"], error)
        if error > report.bounds["estep"]:
            estep.append({"case": case, "value": error, "bound": report.bounds["estep"], "detail": "centroid block"})

        loss = perm_loss(tf_forward(params, h), one_hot(trace.assignments[1], 2))
        worst["assign"] = max(worst["assign"], loss)
        if loss > ASSIGN_LOSS:
            assign.append({"case": case, "value": loss, "bound": ASSIGN_LOSS, "detail": "perm_loss vs Lloyd round"})

    ledger.record("em_selection", config.em_instances, worst["selection"], selection)
    ledger.record("em_estep", config.em_instances, worst["estep"], estep)
    ledger.record("em_assign", config.em_instances, worst["assign"], assign)


def _pca(config: AuditConfig, ledger: AuditLedger):
    rows, worst = [], 0.0
    for case in range(config.pca_matrices):
        rng = np.random.default_rng([config.seed, case])
        x, values = random_spd_data(6, [8.0, 4.0], 1.0, rng)
        a = x @ x.T
        _, truth = jacobi_eigh(a)
        vectors, *_ = run_pca_construction(x, 2, 40, config.m_heads, config.seed + case)
        last = vectors[:, 1] / np.linalg.norm(vectors[:, 1])
        error = float(np.linalg.norm(last * np.sign(last @ truth[:, 1]) - truth[:, 1]))
        bound = estimate_bound(a, vectors, values)
        worst = max(worst, error / bound if bound > 0 else np.inf)
        if error > bound:
            rows.append({"case": case, "value": error, "bound": bound, "detail": "second eigenvector"})
    ledger.record("pca_bound", config.pca_matrices, worst, rows)


def cmd_audit_bounds(config: AuditConfig, out: str) -> int:
    """
    Returns:
        exit status: 0 iff no check recorded a violation, else 1
    """
    ledger = AuditLedger()
    print(f"\n[STEP 1] Hardmax gap audit ({config.draws} draws)")
    _hardmax(config, ledger)
    print(f"[STEP 2] Random-feature decay audits (m = {config.decay_ms})")
    _decay(config, ledger)
    _softmax_decay(config, ledger)
    print(f"[STEP 3] EM construction fidelity ({config.em_instances} instances)")
    _em(config, ledger)
    print(f"[STEP 4] PCA bound instantiation ({config.pca_matrices} matrices)")
    _pca(config, ledger)

    stem = f"audit_seed{config.seed}"
    write_csv(pd.DataFrame(ledger.violations, columns=VIOLATION_COLUMNS),
              os.path.join(out, "results", f"{stem}_violations.csv"))
    write_csv(pd.DataFrame(ledger.summary, columns=SUMMARY_COLUMNS),
              os.path.join(out, "results", f"{stem}_summary.csv"))
    total = len(ledger.violations)
    print(f"\n{'✓ All bounds held' if not total else f'✗ {total} violation(s)'}")
    return 0 if not total else 1
