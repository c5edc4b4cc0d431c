import logging
from logging import Logger
import os
from logging.config import dictConfig
from dotenv import load_dotenv

load_dotenv()
LOG_LEVEL = os.environ.get("BEC_WALK_LOG_LEVEL", "INFO").upper()
EXTRA_LOGGERS = [
    name.strip()
    for name in os.environ.get("BEC_WALK_LOGGERS", "").split(",")
    if name.strip()
]

LOGGER_DEFAULTS = {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False}

LOGGING_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {"format": "[%(levelname)s - %(module)s.py]: %(message)s"},
    },
    "handlers": {
        "console": {
            "level": LOG_LEVEL,
            "formatter": "standard",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",  # stdout carries CSV/JSON results
        },
    },
    "loggers": {
        "__main__": LOGGER_DEFAULTS,
        "bec_walk_library": LOGGER_DEFAULTS,
        **{logger: LOGGER_DEFAULTS for logger in EXTRA_LOGGERS},
    },
}


def get_logger(name: str) -> Logger:
    """A function to instantiate a logger

    Parameters
    ----------
    name : str
        name of the logger, normally the calling module's ``__name__``

    Returns
    -------
    Logger
        A logger object
    """
    dictConfig(LOGGING_CONFIG)
    log = logging.getLogger(name)

    return log
