"""Worker-pool plumbing with deterministic result ordering."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence


def worker_count() -> int:
    """Worker cap: RAGKIT_THREADS env var, else hardware parallelism."""
    env = os.environ.get("RAGKIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def map_ordered(fn: Callable, items: Sequence, max_workers: int | None = None) -> list:
    """Apply fn to items, returning results in input order.

    Tasks must be pure; with one worker this degrades to a plain loop and
    produces identical results.
    """
    items = list(items)
    workers = worker_count() if max_workers is None else max_workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
