"""Command handlers for the gsgd CLI."""
from .handlers import ExperimentCommands

__all__ = ["ExperimentCommands"]
