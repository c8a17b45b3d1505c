"""Process-wide settings for the GSGD laboratory."""
import os
from typing import Optional
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Centralized configuration; experiment-specific values live in the JSON experiment config."""

    # Output
    OUTPUT_DIR: Optional[str] = os.getenv("GSGD_OUT") or None
    CSV_PRECISION: int = 17  # significant digits, round-trips float64 exactly

    # Runner
    PROBE_PERIOD: int = 100
    DIVERGENCE_BOUND: float = 1e12
    MAX_WORKERS: int = int(os.getenv("GSGD_MAX_WORKERS", "4"))
    PROGRESS_LOG_INTERVAL_SECONDS: float = 5.0

    # Diagnostics
    MIN_NORM_TOLERANCE: float = 1e-9
    HULL_KINK_CAP: int = 12  # at most 2^12 enumerated vertices
    SAMPLED_STATIONARITY_COUNT: int = 64
    SHADOW_PROBES: int = 5
    HULL_CACHE_SIZE: int = 256

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: Optional[str] = os.getenv("LOG_FILE", "gsgd.log") or None

    @classmethod
    def validate(cls) -> None:
        """Validate critical configuration values."""
        if cls.MAX_WORKERS < 1:
            raise ValueError("GSGD_MAX_WORKERS must be at least 1")
        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"LOG_LEVEL {cls.LOG_LEVEL!r} is not a logging level")
        if cls.HULL_KINK_CAP < 0 or cls.PROBE_PERIOD < 1:
            raise ValueError("HULL_KINK_CAP must be >= 0 and PROBE_PERIOD >= 1")

    @classmethod
    def to_dict(cls) -> dict:
        """Export settings as dictionary."""
        return {
            "output_dir": cls.OUTPUT_DIR,
            "csv_precision": cls.CSV_PRECISION,
            "probe_period": cls.PROBE_PERIOD,
            "divergence_bound": cls.DIVERGENCE_BOUND,
            "max_workers": cls.MAX_WORKERS,
            "hull_kink_cap": cls.HULL_KINK_CAP,
            "min_norm_tolerance": cls.MIN_NORM_TOLERANCE,
        }
