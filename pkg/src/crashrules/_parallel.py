from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "CRASH_RULES_THREADS"


def thread_count(n_jobs: int | None = None) -> int:
    """Worker count from ``n_jobs`` or $CRASH_RULES_THREADS (0 means one per CPU)."""
    if n_jobs is None:
        raw = os.environ.get(THREADS_ENV, "1").strip() or "1"
        try:
            n_jobs = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n_jobs < 0:
        raise ValueError(f"thread count must be >= 0, got {n_jobs}")
    return n_jobs or os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], n_jobs: int | None = None) -> list[R]:
    """``list(map(fn, items))``, optionally on a thread pool; result order is input order."""
    items = list(items)
    workers = min(thread_count(n_jobs), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
