"""Bounded memoization for hull queries."""
from collections import OrderedDict
from typing import Callable, Generic, Optional, Tuple, TypeVar

import numpy as np

T = TypeVar("T")


def point_key(x: np.ndarray, *extra) -> Tuple:
    """Hashable key for a float64 point, exact to the bit."""
    return (np.ascontiguousarray(x, dtype=np.float64).tobytes(),) + tuple(extra)


class BoundedCache(Generic[T]):
    """Least-recently-used cache with a fixed number of entries."""

    def __init__(self, max_entries: int = 256):
        """
        Initialize cache.

        Args:
            max_entries: entries kept before the least recently used is evicted
        """
        self.max_entries = max_entries
        self._cache: "OrderedDict[Tuple, T]" = OrderedDict()

    def get(self, key: Tuple) -> Optional[T]:
        """
        Retrieve value from cache.

        Returns:
            Cached value or None if not present
        """
        if key not in self._cache:
            return None
        self._cache.move_to_end(key)
        return self._cache[key]

    def set(self, key: Tuple, value: T) -> None:
        self._cache[key] = value
        self._cache.move_to_end(key)
        while len(self._cache) > self.max_entries:
            self._cache.popitem(last=False)

    def get_or_compute(self, key: Tuple, compute: Callable[[], T]) -> T:
        value = self.get(key)
        if value is None:
            value = compute()
            self.set(key, value)
        return value
