"""Fixed-partition row blocks, optionally run on a thread pool."""

from __future__ import annotations

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

LOG = logging.getLogger(__name__)

T = TypeVar("T")


def block_bounds(n: int, block_size: int) -> list[tuple[int, int]]:
    """Split ``range(n)`` into consecutive [start, stop) blocks."""
    if block_size < 1:
        raise ValueError(f"block_size must be at least 1, got {block_size}")
    return [(start, min(start + block_size, n)) for start in range(0, n, block_size)]


def map_blocks(
    fn: Callable[[int, int], T], n: int, block_size: int, threads: int = 1
) -> list[T]:
    """Apply ``fn(start, stop)`` to every block and return results in block order.

    Block boundaries depend only on ``n`` and ``block_size``, never on
    ``threads``, so results are identical for any worker count.
    """
    bounds = block_bounds(n, block_size)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]

    workers = min(threads, len(bounds))
    LOG.debug(f"Running {len(bounds)} blocks on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda bound: fn(*bound), bounds))
