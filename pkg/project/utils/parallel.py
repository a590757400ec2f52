from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map in a thread pool; results keep the input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def row_bands(n_rows: int, threads: int, min_rows: int = 16) -> list[tuple[int, int]]:
    """Split [0, n_rows) into contiguous bands, a few per worker."""
    if n_rows <= 0:
        return []
    n_bands = max(1, min(n_rows // max(min_rows, 1), max(threads, 1) * 4))
    edges = [round(i * n_rows / n_bands) for i in range(n_bands + 1)]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
