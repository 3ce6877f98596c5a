"""
Structured logging setup.

Events are JSON lines on stderr (console rendering in debug mode), so report
tables printed on stdout stay machine-readable. Run-wide context such as the
command and seed is bound once through contextvars and attached to every event,
including events from replication worker threads.
"""
import logging
import sys
from typing import Any, MutableMapping

import numpy as np
import structlog

MAX_LOGGED_ARRAY = 16


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size <= MAX_LOGGED_ARRAY:
            return value.tolist()
        return {"shape": list(value.shape), "dtype": str(value.dtype)}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def numpy_to_python(
    logger: Any, method_name: str, event_dict: MutableMapping[str, Any]
) -> MutableMapping[str, Any]:
    """Processor: numpy scalars become Python numbers, large arrays a shape summary."""
    for key, value in event_dict.items():
        event_dict[key] = _plain(value)
    return event_dict


def configure_logging(log_level: str = "INFO", debug: bool = False) -> None:
    """
    Configure structlog and the stdlib root logger.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR)
        debug: Render human-readable console output instead of JSON lines

    Raises:
        ValueError: If log_level is not a known level name
    """
    level = logging.getLevelName(log_level.upper())
    if not isinstance(level, int):
        raise ValueError(f"unknown log level {log_level!r}")

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.processors.format_exc_info,
            numpy_to_python,
            structlog.dev.ConsoleRenderer() if debug else structlog.processors.JSONRenderer(),
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level, force=True)
    logging.getLogger("asyncio").setLevel(logging.WARNING)


def bind_run_context(**context: Any) -> None:
    """Attach key-values (command, seed, ...) to every later event of this run."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(**context)
