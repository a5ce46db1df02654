from __future__ import annotations

import logging
import os
from pathlib import Path

from ncrough.domain.errors import ConfigError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
ROOT_LOGGER = "ncrough"


def resolve_level(level: str | None = None) -> int:
    """--log-level, sinon NCROUGH_LOG_LEVEL, sinon WARNING."""
    name = (level or os.environ.get("NCROUGH_LOG_LEVEL") or "WARNING").upper()
    value = logging.getLevelName(name)
    if not isinstance(value, int):
        raise ConfigError(f"Niveau de journalisation inconnu : {level}")
    return value


def setup_logging(level: str | None = None, log_file: Path | None = None) -> logging.Logger:
    """
    Configure le logger racine du paquet (stderr, et fichier si demandé).
    Idempotent : les handlers posés par un appel précédent sont remplacés.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(resolve_level(level))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    logger.addHandler(stream)

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
