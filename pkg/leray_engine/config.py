"""
Настройки движка (переменные окружения LERAY_*, опционально файл .env)
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exact_algebra import CoefficientMode

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240611


class EngineSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="LERAY_", extra="ignore")

    # каталог, где ищутся относительные пути входных файлов
    fixtures_dir: Optional[Path] = None
    coefficients: CoefficientMode = CoefficientMode.INTEGERS
    output_format: str = "table"
    # 0 = до стабилизации
    r_max: int = Field(default=0, ge=0)
    seed: int = DEFAULT_SEED
    random_corpus_size: int = Field(default=200, ge=0)
    max_workers: int = Field(default=4, ge=1)
    log_level: str = "WARNING"

    @field_validator("output_format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in ("table", "records"):
            raise ValueError("output_format must be 'table' or 'records'")
        return value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        value = value.upper()
        if not isinstance(logging.getLevelName(value), int):
            raise ValueError(f"Unknown log level '{value}'")
        return value


@lru_cache()
def get_settings() -> EngineSettings:
    load_dotenv()
    settings = EngineSettings()
    logger.debug(f"🔧 settings loaded: {settings.model_dump()}")
    return settings
