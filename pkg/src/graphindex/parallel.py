"""Order-preserving thread-pool map capped by ``GRAPHINDEX_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def max_workers() -> int:
    """Worker cap: ``GRAPHINDEX_THREADS`` if set and positive, else the CPU count."""
    raw = os.environ.get("GRAPHINDEX_THREADS", "").strip()
    if raw:
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"GRAPHINDEX_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ValueError("GRAPHINDEX_THREADS must be positive")
        return value
    return max(1, min(8, os.cpu_count() or 1))


def parallel_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """Apply ``fn`` to every item; results come back in input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
