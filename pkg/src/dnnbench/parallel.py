"""Deterministic data-parallel map over fixed work tiles.

Kernels split their output into tiles whose boundaries depend only on the
layer shape, never on the worker count. Each tile is computed by exactly one
worker with the same sequential reduction order, so results are bit-identical
for any number of workers.
"""

from __future__ import annotations

import contextlib
import threading
from concurrent.futures import ThreadPoolExecutor

_state = threading.local()
_pools = {}
_pools_lock = threading.Lock()


def get_workers() -> int:
    return getattr(_state, "workers", 1)


def set_workers(n: int) -> None:
    if int(n) < 1:
        raise ValueError("worker count must be >= 1")
    _state.workers = int(n)


@contextlib.contextmanager
def workers(n):
    prev = get_workers()
    set_workers(n)
    try:
        yield
    finally:
        set_workers(prev)


def _pool(n):
    with _pools_lock:
        if n not in _pools:
            _pools[n] = ThreadPoolExecutor(max_workers=n, thread_name_prefix="dnnbench")
        return _pools[n]


def tiles(n, size):
    """Split ``range(n)`` into consecutive ``(start, stop)`` tiles of ``size``."""
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def parallel_map(fn, items, n_workers=None):
    """Apply ``fn`` to each item; results come back in item order."""
    items = list(items)
    n = get_workers() if n_workers is None else n_workers
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    return list(_pool(n).map(fn, items))
