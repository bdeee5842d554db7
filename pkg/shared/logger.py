"""
Console logging for tgifs.

Every module asks for a component logger; all of them share one line format

    [14:32:01] [engine] INFO: Lindblad evolution finished

and live under the "tgifs." namespace so the CLI can retune them together.
TGIFS_LOG_LEVEL sets the starting level, NO_COLOR turns ANSI colors off.
"""

import logging
import os
import sys
from typing import Optional, Union


LOGGER_PREFIX = "tgifs"

COLORS = {
    "DEBUG": "\033[36m",
    "INFO": "\033[32m",
    "WARNING": "\033[33m",
    "ERROR": "\033[31m",
    "CRITICAL": "\033[35m",
}
RESET = "\033[0m"
BOLD = "\033[1m"


class ComponentFormatter(logging.Formatter):
    """[time] [component] LEVEL: message, optionally colored."""

    def __init__(self, component: str, use_colors: bool = True):
        super().__init__()
        self.component = component
        self.use_colors = use_colors

    def format(self, record: logging.LogRecord) -> str:
        stamp = self.formatTime(record, "%H:%M:%S")
        level = record.levelname
        text = record.getMessage()
        if record.exc_info:
            text = f"{text}\n{self.formatException(record.exc_info)}"
        if not self.use_colors:
            return f"[{stamp}] [{self.component}] {level}: {text}"
        color = COLORS.get(level, RESET)
        return f"{color}[{stamp}]{RESET} {BOLD}[{self.component}]{RESET} {color}{level}{RESET}: {text}"


class StdoutHandler(logging.StreamHandler):
    """Writes to whatever sys.stdout is at emit time (survives redirection and capture)."""

    def __init__(self):
        super().__init__(sys.stdout)

    @property
    def stream(self):
        return sys.stdout

    @stream.setter
    def stream(self, _value):
        pass


def _env_level(default: int) -> int:
    name = os.getenv("TGIFS_LOG_LEVEL", "").strip().upper()
    value = logging.getLevelName(name) if name else default
    return value if isinstance(value, int) else default


def _colors_wanted() -> bool:
    if os.getenv("NO_COLOR"):
        return False
    return hasattr(sys.stdout, "isatty") and sys.stdout.isatty()


def get_logger(
    component: str,
    level: int = logging.INFO,
    use_colors: Optional[bool] = None,
) -> logging.Logger:
    """
    Component logger "tgifs.<component>" with a single stdout handler.

    Repeat calls return the same logger without stacking handlers.

    Args:
        component: Short component name shown in every line ("engine", "cli")
        level: Starting level unless TGIFS_LOG_LEVEL overrides it
        use_colors: Force colors on/off (auto-detected if None)
    """
    logger = logging.getLogger(f"{LOGGER_PREFIX}.{component}")
    if logger.handlers:
        return logger

    logger.setLevel(_env_level(level))
    handler = StdoutHandler()
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(ComponentFormatter(component, _colors_wanted() if use_colors is None else use_colors))
    logger.addHandler(handler)
    logger.propagate = False
    return logger


def set_level(level: Union[int, str]):
    """Retune every tgifs logger created so far."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    for name, existing in logging.Logger.manager.loggerDict.items():
        if name.startswith(f"{LOGGER_PREFIX}.") and isinstance(existing, logging.Logger):
            existing.setLevel(level)


def log_banner(logger: logging.Logger, title: str, **fields):
    """Start-of-run banner: title plus one key: value line per field."""
    rule = "=" * 50
    logger.info(rule)
    logger.info(title)
    for key, value in fields.items():
        logger.info(f"{key}: {value}")
    logger.info(rule)
