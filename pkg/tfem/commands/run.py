"""
tfem/commands/run.py
Run one instance across the requested arms.
"""

import logging
import os

from tfem.commands.config import RunConfig
from tfem.construct.em import em_construction_for
from tfem.transformer.container import save_params
from tfem.utils.analysis.analysis_worker import ClusterTask, analyze_task, instance_for
from tfem.utils.report_writer import results_frame, write_csv, write_json

logger = logging.getLogger(__name__)


def task_from(config: RunConfig) -> ClusterTask:
    return ClusterTask(
        variable="run", value=0.0, seed=config.seed, instance_seed=config.seed,
        k=config.k, d=config.d, per_cluster=config.per_cluster, delta=config.delta,
        sigma=config.sigma, sigma_range=config.sigma_range, imbalance=config.imbalance,
        tau=config.tau, m_heads=config.m_heads, beta=config.beta, feature_seed=config.feature_seed,
        init=config.init.value, arms=tuple(arm.value for arm in config.arms), instance_path=config.instance,
    )


def cmd_run(config: RunConfig, out: str) -> int:
    """
    Returns:
        exit status: 0 when every arm completed, else the failing arm's error code (3)
    """
    task = task_from(config)
    source = config.instance or f"generated (seed {config.seed})"
    print(f"\n[STEP 1] Instance: {source}")
    print(f"[STEP 2] Arms: {', '.join(task.arms)}  tau={task.tau}  m_heads={task.m_heads}")
    rows = analyze_task(task, thread_id=1)

    for row in rows:
        if row["success"]:
            print(f"✓ {row['arm']:8s} perm_loss={row['perm_loss']:.4g} ari={row['ari']:.4f} "
                  f"nmi={row['nmi']:.4f} misclass={row['misclass']:.4f}")
        else:
            print(f"✗ {row['arm']:8s} {row['error']}")

    stem = f"run_seed{config.seed}"
    write_csv(results_frame(rows), os.path.join(out, "results", f"{stem}.csv"))
    write_json(
        {
            "config": config.model_dump(mode="json"),
            "wall_seconds": {row["arm"]: row["wall"] for row in rows},
            "constructions": {row["arm"]: row["report"] for row in rows if row["report"] is not None},
        },
        os.path.join(out, "reports", f"{stem}.json"),
    )

    if config.save_params:
        instance = instance_for(task)
        for arm in task.arms:
            if arm == "lloyd":
                continue
            params, _ = em_construction_for(instance, task.tau, task.m_heads, task.beta,
                                            plus=(arm == "tf_plus"), seed=task.feature_seed)
            path = save_params(os.path.join(out, "reports", f"{stem}_{arm}.tfem"), params)
            print(f"✓ saved {arm} weights to {path}")

    failed = [row for row in rows if not row["success"]]
    return 0 if not failed else 3
