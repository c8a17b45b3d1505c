"""Unit tests for utility modules."""
import logging
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from config import Config
from utils.cache import BoundedCache, point_key
from utils.logger import get_logger, setup_logger
from utils.rate_limit import ProgressThrottle


class FakeClock:
    def __init__(self):
        self.now = 100.0

    def __call__(self) -> float:
        return self.now


class TestPointKey(unittest.TestCase):
    """Test cases for point_key."""

    def test_equal_points_share_key(self):
        """Test equal float64 points give equal keys."""
        self.assertEqual(point_key(np.array([0.1, 2.0])), point_key([0.1, 2.0]))

    def test_bit_exact(self):
        """Test points one ulp apart give different keys."""
        x = np.array([1.0])
        self.assertNotEqual(point_key(x), point_key(np.nextafter(x, 2.0)))

    def test_extra_fields(self):
        """Test extra fields are part of the key."""
        x = np.zeros(2)
        self.assertNotEqual(point_key(x, "hull", 0.0), point_key(x, "hull", 0.1))


class TestBoundedCache(unittest.TestCase):
    """Test cases for BoundedCache."""

    def setUp(self):
        """Set up test fixtures."""
        self.cache = BoundedCache(max_entries=2)

    def test_set_and_get(self):
        """Test setting and getting cache values."""
        self.cache.set(("a",), 1)
        self.assertEqual(self.cache.get(("a",)), 1)
        self.assertIsNone(self.cache.get(("b",)))

    def test_evicts_least_recently_used(self):
        """Test the oldest untouched entry goes first."""
        self.cache.set(("a",), 1)
        self.cache.set(("b",), 2)
        self.cache.get(("a",))
        self.cache.set(("c",), 3)
        self.assertIsNone(self.cache.get(("b",)))
        self.assertEqual(self.cache.get(("a",)), 1)

    def test_get_or_compute(self):
        """Test the factory runs once per key."""
        calls = []

        def compute():
            calls.append(1)
            return 42

        self.assertEqual(self.cache.get_or_compute(("k",), compute), 42)
        self.assertEqual(self.cache.get_or_compute(("k",), compute), 42)
        self.assertEqual(len(calls), 1)


class TestProgressThrottle(unittest.TestCase):
    """Test cases for ProgressThrottle."""

    def setUp(self):
        """Set up test fixtures."""
        self.clock = FakeClock()
        self.throttle = ProgressThrottle(5.0, clock=self.clock)

    def test_first_event_allowed(self):
        """Test the first event per key passes."""
        self.assertTrue(self.throttle.is_allowed("progress"))
        self.assertTrue(self.throttle.is_allowed("other"))

    def test_blocks_within_interval(self):
        """Test a second event inside the interval is held back."""
        self.throttle.is_allowed("progress")
        self.clock.now += 4.0
        self.assertFalse(self.throttle.is_allowed("progress"))

    def test_allows_after_interval(self):
        """Test the event passes once the interval has elapsed."""
        self.throttle.is_allowed("progress")
        self.clock.now += 5.0
        self.assertTrue(self.throttle.is_allowed("progress"))


class TestLogger(unittest.TestCase):
    """Test cases for setup_logger."""

    def test_idempotent(self):
        """Test repeated setup does not stack handlers."""
        with patch.object(Config, "LOG_FILE", None):
            logger = setup_logger("gsgd.test.idempotent", level="DEBUG")
            count = len(logger.handlers)
            setup_logger("gsgd.test.idempotent", level="DEBUG")
        self.assertEqual(len(logger.handlers), count)
        self.assertEqual(logger.level, logging.DEBUG)

    def test_file_handler(self):
        """Test a log file is written when requested."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "run.log")
            logger = setup_logger("gsgd.test.file", log_file=path, level="INFO")
            logger.info("probe written")
            for handler in logger.handlers:
                handler.flush()
            with open(path, encoding="utf-8") as f:
                self.assertIn("probe written", f.read())
            for handler in list(logger.handlers):
                handler.close()
                logger.removeHandler(handler)

    def test_get_logger(self):
        """Test get_logger returns the named logger."""
        self.assertEqual(get_logger("gsgd.test.named").name, "gsgd.test.named")


if __name__ == "__main__":
    unittest.main()
