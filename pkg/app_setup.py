"""
Application setup module for the Heavy Ball lab.
This module handles initialization of logging for the command-line harness.
"""
import logging
import sys
from typing import Optional

from config import LOG_FILE, LOG_LEVEL, LOG_FORMAT, QUIET_LOG_LEVEL


def setup_logging(quiet: bool = False, log_file: Optional[str] = LOG_FILE) -> None:
    """
    Configure logging for the application.

    Logs go to stderr so that CSV written to stdout stays clean.

    Args:
        quiet: Only report warnings and errors on the console
        log_file: Optional path of a log file that receives the same records
    """
    level = QUIET_LOG_LEVEL if quiet else LOG_LEVEL
    root = logging.getLogger('')
    root.setLevel(level)
    formatter = logging.Formatter(LOG_FORMAT)

    # Repeated calls (tests, selftest) must not stack handlers
    for handler in list(root.handlers):
        if getattr(handler, "_heavyball_lab", False):
            root.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    console.setFormatter(formatter)
    console._heavyball_lab = True
    root.addHandler(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, mode='a')
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        file_handler._heavyball_lab = True
        root.addHandler(file_handler)

    logging.debug("Logging initialized")
