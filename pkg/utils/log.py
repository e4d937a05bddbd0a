# Log

import json
import logging
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class StructuredLogger:
    """Provides structured logging capabilities for mtrace."""

    def __init__(self, name: str = "mtrace", log_file: Optional[str] = None):
        """
        Initialize the structured logger.

        Args:
            name (str): Logger name
            log_file (Optional[str]): Path to log file. If None, logs to stderr only.
        """
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        self.logger.addHandler(console_handler)

        if log_file:
            self.add_file_handler(log_file)

    def setLevel(self, level: str) -> None:
        """
        Set the logging level.

        Args:
            level (str): The logging level (e.g., 'INFO', 'DEBUG', etc.)
        """
        numeric_level = logging.getLevelName(level.upper())
        if not isinstance(numeric_level, int):
            numeric_level = logging.INFO
        self.logger.setLevel(numeric_level)

    def _format_message(self, message: str, extra: Optional[Dict[str, Any]] = None) -> str:
        """
        Format a log message with extra data.

        Args:
            message (str): The log message
            extra (Optional[Dict[str, Any]]): Additional data to log

        Returns:
            str: Formatted log message
        """
        if not extra:
            return message

        log_data = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "message": message,
            **extra
        }
        return json.dumps(log_data, sort_keys=True, default=str)

    def info(self, message: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self.logger.info(self._format_message(message, extra))

    def warning(self, message: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self.logger.warning(self._format_message(message, extra))

    def error(self, message: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self.logger.error(self._format_message(message, extra))

    def debug(self, message: str, extra: Optional[Dict[str, Any]] = None) -> None:
        # skip the JSON rendering when nobody listens
        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(self._format_message(message, extra))

    def exception(self, message: str, extra: Optional[Dict[str, Any]] = None) -> None:
        self.logger.exception(self._format_message(message, extra))

    @contextmanager
    def stage(self, name: str, timings: Optional[Dict[str, float]] = None) -> Iterator[None]:
        """
        Time a pipeline stage.

        Args:
            name (str): Stage name, used as the key in ``timings``
            timings (Optional[Dict[str, float]]): Map receiving the elapsed seconds
        """
        started = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - started
            if timings is not None:
                timings[name] = timings.get(name, 0.0) + elapsed
            self.debug("stage finished", {"stage": name, "seconds": round(elapsed, 6)})

    def add_file_handler(self, log_file: str) -> None:
        """
        Add a file handler to the logger.

        Args:
            log_file (str): Path to the log file
        """
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        self.logger.addHandler(file_handler)


# Create a default logger instance
logger = StructuredLogger()
