"""Thread pool helpers shared by per-slice operations."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, Iterable, TypeVar

from .const import DEFAULT_THREADS

_LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_thread_limit = DEFAULT_THREADS


def set_thread_limit(threads: int) -> None:
    """Cap the number of worker threads used by map_ordered."""
    global _thread_limit
    _thread_limit = max(1, int(threads))
    _LOGGER.debug("Worker thread limit set to %d", _thread_limit)


def get_thread_limit() -> int:
    """Return the current worker thread cap."""
    return _thread_limit


def map_ordered(func: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply func to every item and return results in input order."""
    items = list(items)
    workers = min(threads or _thread_limit, len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
