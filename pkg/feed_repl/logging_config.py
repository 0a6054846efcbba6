"""Central logging configuration for feed_repl.

A console logger is configured by default; a log file in the user's config
directory is added when it can be created.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from . import store

_LOGGER_NAME_PREFIX = "feedrepl"
_DEFAULT_LEVEL = logging.INFO
LOG_LEVEL_ENV = "FEEDREPL_LOG_LEVEL"


def _get_log_file_path() -> Path:
    """Return the path of the feed_repl log file.

    Lives next to the run index in the config directory; falls back to the
    home directory if the config directory cannot be resolved.
    """
    try:
        return store.config_dir() / "feedrepl.log"
    except Exception:
        return Path.home() / ".feedrepl.log"


def resolve_level(level: int | str | None = None) -> int:
    """Turn an explicit level, or the environment override, into an int."""
    if level is None:
        level = os.getenv(LOG_LEVEL_ENV)
        if not level:
            return _DEFAULT_LEVEL
    if isinstance(level, str):
        return int(getattr(logging, level.upper(), _DEFAULT_LEVEL))
    return int(level)


def configure_logging(level: int | str | None = None, log_file: bool = True) -> None:
    """Configure the root feed_repl logger.

    Idempotent: a second call only adjusts the level and never adds
    duplicate handlers.

    Args:
        level: Logging level or level name. ``None`` reads
            ``FEEDREPL_LOG_LEVEL`` and defaults to INFO.
        log_file: Also write to ``feedrepl.log`` in the config directory.
    """
    resolved_level = resolve_level(level)

    logger = logging.getLogger(_LOGGER_NAME_PREFIX)
    if logger.handlers:
        logger.setLevel(resolved_level)
        for handler in logger.handlers:
            handler.setLevel(resolved_level)
        return

    logger.setLevel(resolved_level)

    formatter = logging.Formatter(
        fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    console_handler = logging.StreamHandler()
    console_handler.setLevel(resolved_level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if not log_file:
        return
    try:
        path = _get_log_file_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setLevel(resolved_level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)
    except Exception:
        # Console-only is fine.
        pass


def get_logger(name: str | None = None) -> logging.Logger:
    """Return a child logger for the given module name.

    Example::

        from .logging_config import get_logger
        logger = get_logger(__name__)
    """
    if name is None:
        return logging.getLogger(_LOGGER_NAME_PREFIX)
    if name.startswith("feed_repl."):
        name = name[len("feed_repl.") :]
    return logging.getLogger(f"{_LOGGER_NAME_PREFIX}.{name}")
