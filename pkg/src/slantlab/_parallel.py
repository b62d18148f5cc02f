from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "SLANTLAB_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_THREADS, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def pmap(fn, items):
    """`map` over items, threaded up to SLANTLAB_THREADS, results in input order."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
