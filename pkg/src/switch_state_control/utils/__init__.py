"""
Configuration and logging helpers.
"""

from .config_loader import RunConfig, load_config, load_reference_config, parse_config
from .custom_logger import ConsoleEventFilter, setup_run_logging

__all__ = [
    "RunConfig",
    "load_config",
    "load_reference_config",
    "parse_config",
    "ConsoleEventFilter",
    "setup_run_logging",
]
