"""
Run logging for switch-state control.

Every record goes to a log file, which starts each session with a banner.
The console gets the same records minus per-step and per-sweep event chatter,
which a pattern filter keeps in the file only.
"""

import logging
import os
import re
import sys
import time
from typing import List, Optional, Pattern, TextIO

PACKAGE_LOGGER = "switch_state_control"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ConsoleEventFilter(logging.Filter):
    """
    Drops event records from the console handler.

    Warnings and errors always pass.
    """

    def __init__(self, patterns: Optional[List[str]] = None):
        super().__init__()
        # Messages that describe individual steps, sweeps or enumerations
        self.event_patterns: List[Pattern[str]] = [
            re.compile(p)
            for p in (
                patterns
                or [
                    r"^step \d+",
                    r"^sweep \d+",
                    r"^enumerated \d+",
                    r"^Simulated \d+ steps",
                    r"^Rebuilding plant",
                ]
            )
        ]

    def filter(self, record: logging.LogRecord) -> bool:
        if record.levelno >= logging.WARNING:
            return True
        message = record.getMessage()
        return not any(p.search(message) for p in self.event_patterns)


def session_banner() -> str:
    return f"{'=' * 50}\nSession started at {time.strftime('%Y-%m-%d %H:%M:%S')}\n{'=' * 50}\n"


def setup_run_logging(
    log_path: Optional[str] = "logs/run.log",
    verbose: bool = False,
    console: Optional[TextIO] = None,
) -> logging.Logger:
    """
    Configure the package logger for a command-line run.

    Args:
        log_path: File receiving every record; no file handler when None
        verbose: Show DEBUG records on the console
        console: Stream of the console handler, stderr when None

    Returns:
        logging.Logger: The configured package logger
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console_handler = logging.StreamHandler(console if console is not None else sys.stderr)
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    console_handler.addFilter(ConsoleEventFilter())
    logger.addHandler(console_handler)

    if log_path:
        directory = os.path.dirname(log_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        # 'w' clears the previous session
        with open(log_path, "w") as f:
            f.write(session_banner())
        file_handler = logging.FileHandler(log_path, mode="a")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
    return logger
