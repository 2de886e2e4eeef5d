"""
tfem/utils/analysis/analysis_executor.py
Execute clustering tasks in parallel and merge their rows deterministically.
"""

import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed

from tqdm import tqdm

from tfem.utils.analysis.analysis_worker import ClusterTask, analyze_task, failed_row

logger = logging.getLogger(__name__)

ARM_ORDER = {"lloyd": 0, "tf": 1, "tf_plus": 2}


def sort_key(row: dict):
    return (row["value"], row["seed"], ARM_ORDER.get(row["arm"], len(ARM_ORDER)), row["arm"])


def execute_parallel_analysis(tasks: list[ClusterTask], max_workers: int = 4, progress: bool = True):
    """
    Execute every task over a thread pool.

    Args:
        tasks: ClusterTask list
        max_workers: number of parallel workers
        progress: show a tqdm bar (only when stderr is a terminal)

    Returns:
        Tuple of (rows sorted by (value, seed, arm), elapsed time)
    """
    results = []
    start = time.time()

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {
            executor.submit(analyze_task, task, thread_id): task
            for thread_id, task in enumerate(tasks, start=1)
        }
        bar = tqdm(total=len(futures), desc="tasks", disable=not (progress and sys.stderr.isatty()))
        for future in as_completed(futures):
            task = futures[future]
            try:
                results.extend(future.result())
            except Exception as e:
                print(f"✗ Error in future: {e}")
                logger.exception("task %s=%g seed=%d crashed", task.variable, task.value, task.seed)
                results.extend(failed_row(task, arm, e) for arm in task.arms)
            bar.update(1)
        bar.close()

    results.sort(key=sort_key)
    return results, time.time() - start
