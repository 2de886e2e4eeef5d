"""
tfem/commands/pca.py
PCA arm: the power-iteration construction against Jacobi eigenvectors on
random matrices with a prescribed top spectrum.
"""

import logging
import os

import numpy as np
import pandas as pd

from tfem.commands.config import PcaConfig
from tfem.construct.pca import estimate_bound, run_pca_construction
from tfem.errors import TfemError
from tfem.linalg.kernels import jacobi_eigh
from tfem.utils.report_writer import write_csv, write_json
from tfem.utils.svg_plot import write_line_plot

logger = logging.getLogger(__name__)

PCA_COLUMNS = ["matrix", "vector", "cosine", "eig_est", "eig_true", "bound", "success", "error"]


def random_spd_data(d: int, top, tail_hi: float, rng: np.random.Generator):
    """
    x = Q diag(sqrt(lambda)) Q^T with the given top eigenvalues and a
    Uniform[0, tail_hi] tail, so X X^T has exactly that spectrum.

    Returns:
        (x, eigenvalues in decreasing order)
    """
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    tail = np.sort(rng.uniform(0.0, tail_hi, size=d - len(top)))[::-1]
    values = np.concatenate([np.asarray(top, dtype=np.float64), tail])
    return q @ np.diag(np.sqrt(values)) @ q.T, values


def cosines(vectors: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """|cos| between matching columns."""
    num = np.abs(np.sum(vectors * truth, axis=0))
    return num / (np.linalg.norm(vectors, axis=0) * np.linalg.norm(truth, axis=0))


def cmd_pca(config: PcaConfig, out: str) -> int:
    print(f"\n[STEP 1] PCA construction: d={config.d}, k={config.k}, tau={config.tau}, "
          f"m_heads={config.m_heads}, {config.count} matrices")
    rows, reports = [], []
    for index in range(config.count):
        rng = np.random.default_rng([config.seed, index])
        x, values = random_spd_data(config.d, config.top, config.tail_hi, rng)
        try:
            vectors, eigs, _, report, _ = run_pca_construction(x, config.k, config.tau, config.m_heads, config.seed + index)
            _, truth = jacobi_eigh(x @ x.T)
            cos = cosines(vectors, truth[:, :config.k])
            bound = estimate_bound(x @ x.T, vectors, values)
        except TfemError as e:
            print(f"✗ matrix {index}: {e.kind}: {e.message}")
            rows.extend({"matrix": index, "vector": c, "success": False, "error": f"{e.kind}: {e.message}"}
                        for c in range(config.k))
            continue
        reports.append(report.to_dict())
        for c in range(config.k):
            rows.append({"matrix": index, "vector": c, "cosine": cos[c], "eig_est": eigs[c],
                         "eig_true": values[c], "bound": bound, "success": True, "error": ""})
        print(f"✓ matrix {index}: cosines {', '.join(f'{v:.4f}' for v in cos)}")

    frame = pd.DataFrame(rows, columns=PCA_COLUMNS)
    stem = f"pca_seed{config.seed}"
    print(f"\n[STEP 2] Writing results")
    write_csv(frame, os.path.join(out, "results", f"{stem}.csv"))
    ok = frame[frame["success"].astype(bool)]
    series = {
        f"v{c}": (group["matrix"].to_numpy(), group["cosine"].to_numpy(), np.zeros(len(group)))
        for c, group in ok.groupby("vector", sort=True)
    }
    if series:
        write_line_plot(os.path.join(out, "plots", f"{stem}_cosine.svg"), series,
                        title="eigenvector cosine", xlabel="matrix", ylabel="|cos|")
    write_json({"config": config.model_dump(mode="json"), "constructions": reports},
               os.path.join(out, "reports", f"{stem}.json"))
    return 0 if len(ok) == len(frame) else 3
