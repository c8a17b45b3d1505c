"""Throttling of progress log lines for long runs."""
import time
from typing import Callable, Dict


class ProgressThrottle:
    """Lets a log line through at most once per interval for each key."""

    def __init__(self, interval_seconds: float, clock: Callable[[], float] = time.monotonic):
        """
        Initialize throttle.

        Args:
            interval_seconds: minimum spacing between two allowed events per key
            clock: monotonic time source (injectable for tests)
        """
        self.interval_seconds = interval_seconds
        self._clock = clock
        self._last_allowed: Dict[str, float] = {}

    def is_allowed(self, key: str) -> bool:
        """
        Check whether an event for ``key`` may be emitted now; records it if so.

        The first event for a key is always allowed.
        """
        now = self._clock()
        last = self._last_allowed.get(key)
        if last is not None and now - last < self.interval_seconds:
            return False
        self._last_allowed[key] = now
        return True
