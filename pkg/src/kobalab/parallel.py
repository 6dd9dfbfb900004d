"""Order-preserving sample-parallel map capped by ``KOBALAB_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

from .errors import ConfigurationError


def worker_count():
    """Workers allowed by ``KOBALAB_THREADS`` (default 1), never more than the CPU count."""
    raw = os.environ.get("KOBALAB_THREADS", "1").strip() or "1"
    try:
        k = int(raw)
    except ValueError:
        raise ConfigurationError(f"KOBALAB_THREADS must be an integer, got {raw!r}") from None
    if k < 1:
        raise ConfigurationError("KOBALAB_THREADS must be at least 1")
    return min(k, os.cpu_count() or 1)


def pmap(fn, items, workers=None):
    """``[fn(item) for item in items]``, possibly on several processes.

    Every item must carry its own seed; results come back in input order, so
    the output does not depend on the worker count.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
