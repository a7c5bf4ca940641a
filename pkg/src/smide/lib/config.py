"""Singleton configuration object"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, field_validator

logger = logging.getLogger(__name__)

_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class Settings(BaseModel):
    """Process-wide settings read from the environment (and a `.env` file).

    Attributes:
        output_root: default parent directory for scenario outputs.
        log_level: logging level name.
        log_file: optional path of an extra log file.
    """

    model_config = ConfigDict(frozen=True)

    output_root: Path = Path('output')
    log_level: str = 'INFO'
    log_file: Path | None = None

    @field_validator('log_level')
    @classmethod
    def known_level(cls, value: str) -> str:
        value = value.upper()
        if value not in _LEVELS:
            raise ValueError(f'log level must be one of {", ".join(_LEVELS)}')
        return value


_settings: Settings | None = None


def get_settings() -> Settings:
    """Return the settings singleton, building it on first use."""
    global _settings
    if _settings is None:
        load_dotenv()
        values = {
            'output_root': os.getenv('SMIDE_OUTPUT_ROOT'),
            'log_level': os.getenv('SMIDE_LOG_LEVEL'),
            'log_file': os.getenv('SMIDE_LOG_FILE'),
        }
        _settings = Settings(**{k: v for k, v in values.items() if v})
        logger.debug(f'Loaded settings: {_settings}')
    return _settings


def reset_settings() -> None:
    """Forget the cached settings (tests change the environment)."""
    global _settings
    _settings = None
