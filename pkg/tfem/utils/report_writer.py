"""
tfem/utils/report_writer.py
Results tables, mean/std aggregates and JSON reports.

CSV files are written with %.10g floats, "\\n" line endings and a fixed
column order so that a fixed-seed run reproduces them byte for byte.
"""

import json
import logging
import os

import numpy as np
import pandas as pd

from tfem.errors import ArtifactIOError

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["variable", "value", "seed", "arm", "perm_loss", "ari", "nmi", "misclass", "success", "error", "digest"]
AGGREGATE_COLUMNS = ["variable", "value", "arm", "metric", "mean", "std", "count"]
FLOAT_FORMAT = "%.10g"


def results_frame(rows: list[dict]) -> pd.DataFrame:
    """Rows of the worker, restricted to the results schema."""
    frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    frame["seed"] = frame["seed"].astype(int)
    frame["success"] = frame["success"].astype(bool)
    return frame


def aggregate(frame: pd.DataFrame, metrics=("perm_loss", "ari", "nmi", "misclass")) -> pd.DataFrame:
    """
    Mean and population std of each metric over the successful seeds of
    every (value, arm) cell.
    """
    ok = frame[frame["success"]]
    records = []
    for (variable, value, arm), cell in ok.groupby(["variable", "value", "arm"], sort=True):
        for metric in metrics:
            values = cell[metric].to_numpy(dtype=np.float64)
            records.append({
                "variable": variable,
                "value": value,
                "arm": arm,
                "metric": metric,
                "mean": float(values.mean()),
                "std": float(values.std()),
                "count": int(values.size),
            })
    return pd.DataFrame(records, columns=AGGREGATE_COLUMNS)


def _ensure_dir(path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    try:
        _ensure_dir(path)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}")
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_json(data: dict, path: str) -> str:
    try:
        _ensure_dir(path)
        with open(path, "w") as f:
            json.dump(data, f, indent=2, sort_keys=True, default=float)
            f.write("\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}")
    logger.info("wrote %s", path)
    return path
