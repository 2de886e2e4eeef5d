"""
tfem/commands/sweep.py
Grid sweep: (grid point x seed) tasks over the worker pool, mean/std
aggregation and one SVG per metric.
"""

import logging
import os

import numpy as np

from tfem.commands.config import SweepConfig
from tfem.config.settings import workers
from tfem.utils.analysis.analysis_executor import execute_parallel_analysis
from tfem.utils.analysis.analysis_worker import METRICS, ClusterTask
from tfem.utils.report_writer import aggregate, results_frame, write_csv, write_json
from tfem.utils.svg_plot import write_line_plot

logger = logging.getLogger(__name__)


def instance_seed(base: int, point: int, seed: int) -> int:
    """Independent instance seed per (base seed, grid point, panel seed)."""
    return int(np.random.SeedSequence([base, point, seed]).generate_state(1)[0])


def expand_tasks(config: SweepConfig) -> list[ClusterTask]:
    tasks = []
    for point, value in enumerate(config.grid):
        fields = {
            "k": config.k, "d": config.d, "per_cluster": config.per_cluster, "delta": config.delta,
            "imbalance": config.imbalance, "tau": config.tau,
        }
        fields.update(config.point(value))
        for seed in range(config.seeds):
            tasks.append(ClusterTask(
                variable=config.variable.value, value=float(value), seed=config.seed + seed,
                instance_seed=instance_seed(config.seed, point, seed),
                sigma=config.sigma, sigma_range=config.sigma_range, m_heads=config.m_heads,
                beta=config.beta, feature_seed=config.feature_seed, init=config.init.value,
                arms=tuple(arm.value for arm in config.arms), **fields,
            ))
    return tasks


def cmd_sweep(config: SweepConfig, out: str, progress: bool = True) -> int:
    """
    Returns:
        exit status: 0 when every (point, seed, arm) completed, else 3
    """
    variable = config.variable.value
    tasks = expand_tasks(config)
    max_workers = config.workers or workers()
    print(f"\n[STEP 1] Sweep over {variable}: grid {config.grid}, {config.seeds} seed(s), "
          f"arms {', '.join(a.value for a in config.arms)}")
    print(f"[STEP 2] Running {len(tasks)} task(s) on {max_workers} worker(s)...")
    rows, elapsed = execute_parallel_analysis(tasks, max_workers=max_workers, progress=progress)

    frame = results_frame(rows)
    summary = aggregate(frame)
    stem = f"sweep_{variable}_seed{config.seed}"
    print(f"\n[STEP 3] Writing results ({len(frame)} rows, {elapsed:.1f}s)")
    write_csv(frame, os.path.join(out, "results", f"{stem}.csv"))
    write_csv(summary, os.path.join(out, "results", f"{stem}_agg.csv"))
    for metric in METRICS:
        cells = summary[summary["metric"] == metric]
        series = {
            arm: (group["value"].to_numpy(), group["mean"].to_numpy(), group["std"].to_numpy())
            for arm, group in cells.groupby("arm", sort=True)
        }
        if series:
            write_line_plot(os.path.join(out, "plots", f"{stem}_{metric}.svg"), series,
                            title=f"{metric} vs {variable}", xlabel=variable, ylabel=metric)
    write_json(
        {
            "config": config.model_dump(mode="json"),
            "elapsed_seconds": elapsed,
            "wall_seconds": [
                {"value": r["value"], "seed": r["seed"], "arm": r["arm"], "wall": r["wall"]} for r in rows
            ],
            "digests": sorted({r["digest"] for r in rows if r["digest"]}),
        },
        os.path.join(out, "reports", f"{stem}.json"),
    )

    failed = frame[~frame["success"]]
    if len(failed):
        print(f"⚠ {len(failed)} of {len(frame)} rows failed")
        for error, count in failed["error"].value_counts().items():
            print(f"  ✗ {count} x {error}")
        return 3
    print(f"✓ All {len(frame)} rows completed")
    return 0
