"""
Package Logger
--------------
This module configures logging for cdzsl.

Features:
- Structured JSON log lines, including `extra` fields such as stage, iteration and objective.
- Console output in the `local` environment.
- Optional rotating file log (`CDZSL_LOG_FILE`).
- Captures Python warnings as logs.
"""

import json
import logging
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path

from cdzsl.core.config.settings import settings

ENVIRONMENT = settings.ENVIRONMENT
LOG_LEVEL = settings.LOG_LEVEL

# Attributes every LogRecord carries; anything else came in through `extra=`.
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}

logger = logging.getLogger("cdzsl")

LOG_LEVEL_MAPPING = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

logger.setLevel(LOG_LEVEL_MAPPING.get(LOG_LEVEL, logging.WARNING))


class JSONFormatter(logging.Formatter):
    """Log formatter that outputs one JSON object per record."""

    def format(self, record: logging.LogRecord) -> str:
        log_record = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "file": record.filename,
            "line": record.lineno,
        }
        for key, value in record.__dict__.items():
            if key not in _RESERVED and not key.startswith("_"):
                log_record[key] = value
        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_record, default=str)


def set_log_level(level: str) -> None:
    """
    Overrides the package log level at runtime (used by the CLI `--log-level` option).

    Args:
        level (str): Level name, case-insensitive.
    """
    logger.setLevel(LOG_LEVEL_MAPPING.get(level.upper(), logging.WARNING))


# Console Handler (Only enabled in development)
if ENVIRONMENT == "local" and not logger.handlers:
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(JSONFormatter())
    logger.addHandler(console_handler)

# File Handler (Rotating logs, max 5MB per file, 10 backups)
if settings.LOG_FILE:
    Path(settings.LOG_FILE).parent.mkdir(parents=True, exist_ok=True)
    file_handler = RotatingFileHandler(
        settings.LOG_FILE, maxBytes=5 * 1024 * 1024, backupCount=10
    )
    file_handler.setFormatter(JSONFormatter())
    logger.addHandler(file_handler)

# Capture warnings as logs
logging.captureWarnings(True)
