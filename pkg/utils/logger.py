"""Structured logging setup for the laboratory."""
import logging
import logging.handlers
from typing import Optional
from config import Config


FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"


def setup_logger(name: str, log_file: Optional[str] = None, level: Optional[str] = None) -> logging.Logger:
    """
    Configure and return a logger instance.

    Calling it again for the same name does not stack handlers.

    Args:
        name: Logger name (typically __name__, or "" for the root logger)
        log_file: Optional file path for logging
        level: Log level string (e.g., "INFO", "DEBUG")

    Returns:
        Configured logger instance
    """
    if level is None:
        level = Config.LOG_LEVEL
    level_value = getattr(logging, level.upper())

    logger = logging.getLogger(name)
    logger.setLevel(level_value)
    if getattr(logger, "_gsgd_configured", False):
        return logger

    formatter = logging.Formatter(FORMAT, datefmt="%Y-%m-%d %H:%M:%S")

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level_value)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    # File handler with rotation
    file_path = log_file or Config.LOG_FILE
    if file_path:
        file_handler = logging.handlers.RotatingFileHandler(
            file_path,
            maxBytes=10_485_760,  # 10MB
            backupCount=5,
        )
        file_handler.setLevel(level_value)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger._gsgd_configured = True
    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
