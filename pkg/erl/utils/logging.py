import logging
import sys
from typing import Optional

from erl.utils.settings import get_settings

# third-party loggers that flood DEBUG output during plotting
NOISY_LOGGERS = ("matplotlib", "PIL")


def setup_logging(level: Optional[str] = None) -> None:
    """Log to stdout at ``level``, falling back to ``ERL_LOG_LEVEL``."""
    name = (level or get_settings().log_level).upper()
    log_level = logging.getLevelName(name)
    if not isinstance(log_level, int):
        raise ValueError(f"unknown log level {name!r}")

    logging.basicConfig(
        level=logging.WARNING,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    logging.getLogger("erl").setLevel(log_level)
    for noisy in NOISY_LOGGERS:
        logging.getLogger(noisy).setLevel(max(log_level, logging.WARNING))
