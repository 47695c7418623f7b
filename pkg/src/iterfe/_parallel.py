"""Ordered fan-out over a process pool.

Results come back in task order, so any computation whose tasks are fixed
independently of the worker count yields identical output for 1 or N workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def ordered_map(func, tasks, workers: int = 1):
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(func, tasks))


def chunked(seq, size: int):
    return [seq[i:i + size] for i in range(0, len(seq), size)]
