"""Order-preserving process-pool map."""

from __future__ import annotations

import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor


def ordered_map(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally across ``threads`` worker processes.

    Results come back in input order, so any reduction over them is
    independent of scheduling.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
        return list(pool.map(fn, items))
