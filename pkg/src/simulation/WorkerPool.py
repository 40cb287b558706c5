from __future__ import annotations

import logging
from typing import Callable, Iterable, TypeVar

from gevent.threadpool import ThreadPool

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

# Fixed work-item size, so batches and results do not depend on the worker count.
CHUNK_SIZE = 256


class WorkerPool:
    """Runs independent work items on a gevent thread pool and returns results in submission order.

    Attributes:
        workers (int): number of threads; 1 runs everything inline.
    """

    def __init__(self, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError(f'workers must be at least 1, got {workers}.')

        self.workers: int = workers
        self._pool: ThreadPool | None = ThreadPool(workers) if workers > 1 else None

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        items = list(items)
        if self._pool is None or len(items) < 2:
            return [fn(item) for item in items]

        logger.debug('Dispatching %d work items to %d workers', len(items), self.workers)

        return list(self._pool.map(fn, items))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.kill()
            self._pool = None

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def chunk_slices(size: int, chunk: int = CHUNK_SIZE) -> list[slice]:
    return [slice(start, min(start + chunk, size)) for start in range(0, size, chunk)]


def inline_pool(pool: WorkerPool | None) -> WorkerPool:
    return pool if pool is not None else WorkerPool(1)
