import logging
import platform
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

import numpy as np
import scipy

from config import APP_NAME, APP_VERSION, LOGGER_NAME, LOG_SUBDIR, LOG_FILENAME, LOG_MAX_BYTES, LOG_BACKUP_COUNT

logger = logging.getLogger(LOGGER_NAME)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - [%(command)s] %(message)s'


class RunContextFilter(logging.Filter):
    """Stamps every record with the CLI command being run."""

    def __init__(self, command: str = "-"):
        super().__init__()
        self.command = command

    def filter(self, record: logging.LogRecord) -> bool:
        if not hasattr(record, 'command'):
            record.command = self.command
        return True


def setup_logging(level=logging.INFO, log_to_file: bool = True, command: str = "-"):
    """Set up loggers for console output and a rotating log file in user home directory."""
    logger.setLevel(level)

    # Avoid duplicate handlers if setup is called multiple times
    if logger.handlers:
        for handler in logger.handlers:
            for existing in handler.filters:
                if isinstance(existing, RunContextFilter):
                    existing.command = command
        return logger

    formatter = logging.Formatter(LOG_FORMAT)
    context = RunContextFilter(command)

    # 1. Console Handler (stderr keeps stdout clean for printed results)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.addFilter(context)
    logger.addHandler(console_handler)

    if not log_to_file:
        return logger

    # 2. File Handler
    try:
        log_dir = Path.home() / LOG_SUBDIR
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / LOG_FILENAME

        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=LOG_MAX_BYTES,
            backupCount=LOG_BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setFormatter(formatter)
        file_handler.addFilter(context)
        logger.addHandler(file_handler)
        logger.info(f"Logging initialized. Log file located at: {log_file}")
    except Exception as e:
        # Fallback if home directory log path is not writeable
        logger.warning(f"Could not initialize file logging: {e}. Console logging only.")

    return logger


def run_header(command: str, **fields) -> str:
    """One ``key=value`` line identifying a run; ``None`` fields are skipped."""
    entries = {
        'app': APP_NAME,
        'version': APP_VERSION,
        'command': command,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
    }
    entries.update({key: value for key, value in fields.items() if value is not None})
    return " ".join(f"{key}={value!r}" if isinstance(value, str) and " " in value else f"{key}={value}"
                    for key, value in entries.items())


def log_run_header(command: str, **fields) -> str:
    header = run_header(command, **fields)
    logger.info(f"Run started: {header}")
    return header
