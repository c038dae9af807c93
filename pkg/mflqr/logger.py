"""
Package-wide :mod:`loguru` logger.

Records go to stderr only, so the output of the ``mflqr`` commands on stdout stays clean.
Messages from ``mflqr`` are muted until :func:`enable_logger` is called.
"""

import sys
from enum import StrEnum

import loguru

logger = loguru.logger


class LogLevels(StrEnum):
    """Levels accepted by :func:`set_log_level`, lowest first."""

    TRACE = "TRACE"
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


LOG_FORMAT = "<green>{elapsed}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:{line} - {message}"


class LevelFilter:
    """Sink filter whose threshold can change after the sink is added."""

    def __init__(self, level: LogLevels):
        self.level = LogLevels(level)

    def __call__(self, record) -> bool:
        return record["level"].no >= logger.level(self.level).no


main_filter = LevelFilter(LogLevels.WARNING)

logger.remove()
logger.add(sys.stderr, filter=main_filter, level=0, format=LOG_FORMAT)
logger.disable("mflqr")


def set_log_level(level: LogLevels | str):
    main_filter.level = LogLevels(level)


def enable_logger():
    logger.enable("mflqr")


def disable_logger():
    logger.disable("mflqr")


def verbosity_level(verbosity: int) -> LogLevels | None:
    """Level for a ``-v`` count: ``None`` (muted), INFO, DEBUG, then TRACE."""
    if verbosity <= 0:
        return None
    return (LogLevels.INFO, LogLevels.DEBUG, LogLevels.TRACE)[min(verbosity, 3) - 1]


def configure_verbosity(verbosity: int):
    """Enable the logger at the level of a ``-v`` count. A zero count leaves the logger as it is."""
    level = verbosity_level(verbosity)
    if level is None:
        return
    set_log_level(level)
    enable_logger()
