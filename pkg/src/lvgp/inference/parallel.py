"""Index-ordered task execution, optionally across worker processes."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def run_tasks(fn, tasks, n_jobs: int = 1) -> list:
    """``[fn(t) for t in tasks]``, results always in task order."""
    tasks = list(tasks)
    n_jobs = min(int(n_jobs or 1), len(tasks)) if tasks else 1
    if n_jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, tasks))
