"""Order-preserving thread map capped by ``HARDY_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("HARDY_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"HARDY_THREADS must be a positive integer, got {raw!r}") from None
    return os.cpu_count() or 1


def pmap(fn, items) -> list:
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
