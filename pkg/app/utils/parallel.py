import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

import numpy as np

from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def shards(n: int, size: int = None) -> List[np.ndarray]:
    """Split range(n) into contiguous index blocks."""
    size = max(1, size or settings.SHARD_SIZE)
    return [np.arange(lo, min(lo + size, n), dtype=np.int64) for lo in range(0, n, size)]


def sharded_map(fn: Callable[[T], R], work: Sequence[T], threads: int = None) -> List[R]:
    """Apply `fn` to every shard; results come back in input order whatever the thread count."""
    threads = max(1, threads or settings.THREADS)
    if threads == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    logger.debug("dispatching %d shards over %d threads", len(work), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, work))


def merge_counts(parts: Iterable[np.ndarray]) -> np.ndarray:
    total = None
    for part in parts:
        if total is None:
            total = part.astype(np.int64).copy()
            continue
        if part.shape[0] > total.shape[0]:
            total = np.pad(total, (0, part.shape[0] - total.shape[0]))
        total[: part.shape[0]] += part
    return total if total is not None else np.zeros(0, dtype=np.int64)
