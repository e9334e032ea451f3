"""Ordered thread-pool map used for replications and per-target work."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional


def resolve_threads(threads: Optional[int] = None) -> int:
    """Explicit value, else ``SPARTSM_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("SPARTSM_THREADS")
        if env:
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def map_ordered(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, possibly concurrent; result order is the
    input order regardless of ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
