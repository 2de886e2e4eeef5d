from tfem.approx.features import (
    AtomKind,
    DecayAudit,
    FeatureApprox,
    Target,
    decay_audit,
    fit_relu_features,
    fit_softmax_features,
    softmax_decay_audit,
    softmax_decay_reference,
    target_values,
)
from tfem.approx.hardmax import (
    HardmaxAudit,
    assignment_beta,
    audit_hardmax,
    bound_holds,
    hardmax,
    hardmax_gap_bound,
)

__all__ = [
    "AtomKind",
    "DecayAudit",
    "FeatureApprox",
    "HardmaxAudit",
    "Target",
    "assignment_beta",
    "audit_hardmax",
    "bound_holds",
    "decay_audit",
    "fit_relu_features",
    "fit_softmax_features",
    "hardmax",
    "hardmax_gap_bound",
    "softmax_decay_audit",
    "softmax_decay_reference",
    "target_values",
]
