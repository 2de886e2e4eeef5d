"""
tfem/commands/gen.py
Generate Gaussian-mixture instances and write them as instance CSVs.
"""

import logging
import os

from tfem.commands.config import GenConfig
from tfem.gmm.instance import generate_instance, imbalance_counts
from tfem.utils.file_loader import write_instance_csv

logger = logging.getLogger(__name__)


def cmd_gen(config: GenConfig, out: str) -> int:
    """
    Write `count` instances; instance i uses seed + i.

    Returns:
        exit status
    """
    print(f"\n[STEP 1] Generating {config.count} instance(s): k={config.k}, d={config.d}, delta={config.delta:g}")
    counts = config.per_cluster
    if config.imbalance is not None:
        counts = imbalance_counts(config.k, config.per_cluster, config.imbalance)

    paths = []
    for i in range(config.count):
        seed = config.seed + i
        instance = generate_instance(
            config.k, config.d, counts, config.delta, sigma=config.sigma,
            seed=seed, sigma_range=config.sigma_range,
        )
        path = os.path.join(out, "instances", f"instance_seed{seed}.csv")
        paths.append(write_instance_csv(path, instance))
        print(f"✓ {path} (N={instance.n}, sigma={instance.sigma:.4g})")
    logger.info("generated %d instances under %s", len(paths), out)
    return 0
