"""Logging setup shared by the CLI and the scenario runner."""

from __future__ import annotations

import logging
from pathlib import Path

from tqdm import tqdm

FORMAT = '%(asctime)s - %(levelname)s - %(message)s'


class TqdmLoggingHandler(logging.Handler):
    """
    Custom logging handler compatible with tqdm progress bars.
    """

    def __init__(self, level=logging.NOTSET):
        super().__init__(level)

    def emit(self, record):
        try:
            msg = self.format(record)
            tqdm.write(msg)
            self.flush()
        except Exception:
            self.handleError(record)


def configure_logging(level: str = 'INFO', log_file: Path | None = None) -> None:
    """
    Attach the tqdm-aware handler (and optionally a file handler) to the
    `smide` logger. Calling it again replaces the previous handlers.

    Args:
        level (str): Logging level name.
        log_file (Path, optional): Extra file that receives the same records.
    """
    root = logging.getLogger('smide')
    root.setLevel(level)
    for old in list(root.handlers):
        root.removeHandler(old)
        old.close()

    handler = TqdmLoggingHandler()
    handler.setFormatter(logging.Formatter(FORMAT))
    root.addHandler(handler)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(FORMAT))
        root.addHandler(file_handler)
