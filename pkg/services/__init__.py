"""Optimizer engine, diagnostics and run recording."""
from .optimizer import GsgdConfig, GsgdOptimizer, RunRecord
from .diagnostics import ProbeTracker, ProbeResult

__all__ = ["GsgdConfig", "GsgdOptimizer", "RunRecord", "ProbeTracker", "ProbeResult"]
