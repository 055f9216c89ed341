import logging
import os
import pathlib
from typing import Optional, Union

from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Config:
    # Data and output roots
    MTL_DATA_DIR = os.getenv("MTL_DATA_DIR", "data")
    MTL_OUTPUT_DIR = os.getenv("MTL_OUTPUT_DIR", "runs")

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
    MTL_LOG_FILE = os.getenv("MTL_LOG_FILE")

    def data_dir(self, name: str) -> str:
        """Default directory for one script's (or the grid's) IDX files."""
        return os.path.join(self.MTL_DATA_DIR, name)


def setup_logging(
    level: Union[int, str] = Config.LOG_LEVEL,
    log_file: Optional[Union[str, pathlib.Path]] = Config.MTL_LOG_FILE,
) -> logging.Logger:
    """Configure the package root logger with a console and optional file handler."""
    logger = logging.getLogger()
    logger.setLevel(level)
    formatter = logging.Formatter(LOG_FORMAT)

    if not any(getattr(h, "_mtl_console", False) for h in logger.handlers):
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        console_handler._mtl_console = True  # type: ignore[attr-defined]
        logger.addHandler(console_handler)

    if log_file:
        add_log_file(log_file)

    return logger


def add_log_file(log_file: Union[str, pathlib.Path]) -> logging.Handler:
    """Attach a file handler to the root logger; caller removes it when done."""
    log_file = pathlib.Path(log_file)
    log_file.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_file, mode="w", encoding="utf-8")
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(file_handler)
    return file_handler
