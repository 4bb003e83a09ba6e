from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

_ROOT = "avstress"


def setup_logging(verbose: bool = False, console: Console | None = None) -> logging.Logger:
    """
    Attach a single RichHandler to the package logger.

    Safe to call more than once; later calls only adjust the level.
    """
    logger = logging.getLogger(_ROOT)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=console or Console(stderr=True),
            show_path=False,
            rich_tracebacks=True,
            markup=False,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
        logger.propagate = False
    return logger
