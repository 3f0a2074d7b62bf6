"""
Logging setup driven by settings.

Logs go to stderr (and optionally a file); stdout is reserved for the
human-readable summaries the CLI prints.
"""
import logging
import sys
from typing import Optional

from gpcmc.core.config import settings

_configured = False


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Install handlers on the root logger once; later calls only adjust the level."""
    global _configured

    level = (level or settings.LOG_LEVEL).upper()
    root = logging.getLogger()
    root.setLevel(level)
    if _configured:
        return

    formatter = logging.Formatter(settings.LOG_FORMAT)
    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = log_file or settings.LOG_FILE
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    for handler in handlers:
        handler.setFormatter(formatter)
        root.addHandler(handler)
    _configured = True
