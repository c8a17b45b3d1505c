"""Configuration module for the GSGD laboratory."""
from .settings import Config

__all__ = ["Config"]
