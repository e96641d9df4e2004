"""
Logging configuration using structlog.
"""
import logging
import sys

import structlog
from structlog.processors import JSONRenderer

from config.settings import settings


def setup_logging(level: str = None):
    """
    Configure structured logging.

    Args:
        level: Overrides settings.log_level when given
    """
    log_level = (level or settings.log_level).upper()
    log_level_num = logging.getLevelName(log_level)
    if not isinstance(log_level_num, int):
        log_level_num = logging.INFO

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            JSONRenderer() if settings.is_production else structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level_num),
        context_class=dict,
        # stdout is reserved for command output
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )

    return structlog.get_logger()
