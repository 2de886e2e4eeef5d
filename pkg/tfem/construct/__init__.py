from tfem.construct.audit import audit_selection_layers, estep_fidelity
from tfem.construct.em import (
    build_em_tf,
    build_em_tf_plus,
    default_beta,
    em_construction_for,
    extract_assignments,
    run_em_construction,
)
from tfem.construct.layout import ContextLayout, build_context, build_pca_context, draw_starts, em_layout, pca_layout
from tfem.construct.pca import (
    build_pca_tf,
    decode_estimates,
    estimate_bound,
    estimate_quality,
    run_pca_construction,
    spectral_range,
    tau_split,
)
from tfem.construct.report import ConstructionReport

__all__ = [
    "ConstructionReport",
    "ContextLayout",
    "audit_selection_layers",
    "build_context",
    "build_em_tf",
    "build_em_tf_plus",
    "build_pca_context",
    "build_pca_tf",
    "decode_estimates",
    "default_beta",
    "draw_starts",
    "em_construction_for",
    "em_layout",
    "estep_fidelity",
    "estimate_bound",
    "estimate_quality",
    "extract_assignments",
    "pca_layout",
    "run_em_construction",
    "run_pca_construction",
    "spectral_range",
    "tau_split",
]
