"""Block-level process parallelism with deterministic result order."""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

# Read-only state handed to forked workers without pickling.
_SHARED: dict[str, Any] = {}


def default_jobs() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # not available on every platform
        return max(1, os.cpu_count() or 1)


def _call(args):
    fn, item = args
    return fn(_SHARED, item)


def map_blocks(fn: Callable[[dict, Any], Any], items: Sequence, shared: dict,
               jobs: int = 1, cost: Callable[[Any], float] | None = None) -> list:
    """``[fn(shared, item) for item in items]``, optionally across processes.

    ``fn`` must be a module-level function. Items are dispatched in order of
    decreasing ``cost`` so large blocks start first; results always come
    back in input order, so output never depends on ``jobs``.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1 or "fork" not in mp.get_all_start_methods():
        return [fn(shared, item) for item in items]
    order = list(range(len(items)))
    if cost is not None:
        order.sort(key=lambda i: -cost(items[i]))
    _SHARED.clear()
    _SHARED.update(shared)
    try:
        with ProcessPoolExecutor(min(jobs, len(items)), mp_context=mp.get_context("fork")) as ex:
            done = list(ex.map(_call, [(fn, items[i]) for i in order], chunksize=1))
    finally:
        _SHARED.clear()
    out: list = [None] * len(items)
    for i, res in zip(order, done):
        out[i] = res
    return out
