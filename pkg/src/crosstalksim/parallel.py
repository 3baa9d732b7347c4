"""Deterministic task mapping with an opt-in thread pool.

CROSSTALK_SIM_THREADS caps the worker count (default 1 = serial); results
always come back in input order regardless of the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["worker_count", "pmap"]


def worker_count() -> int:
    raw = os.environ.get("CROSSTALK_SIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn, items):
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
