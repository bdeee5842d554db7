"""
tgifs Shared Infrastructure
Configuration, logging and errors shared across all simulator components.
"""

from .config_loader import get_config, get_nested, CONFIG_PATH
from .logger import get_logger
from . import errors

__all__ = [
    "get_config",
    "get_nested",
    "CONFIG_PATH",
    "get_logger",
    "errors",
]
