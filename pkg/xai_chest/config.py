"""
Конфигурация лаборатории xai-chest

Два уровня настроек:
- Settings - параметры процесса (каталог вывода, логирование, число воркеров),
  читаются из переменных окружения или файла .env
- ExperimentConfig - параметры эксперимента, читаются из YAML-файла

Каждый результат помечается дайджестом канонизированной конфигурации.
"""

from __future__ import annotations

import hashlib
import sys
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Union

import orjson
import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from xai_chest.models.experiment_models import ExperimentConfig
from xai_chest.utils.errors import ArtifactIOError, ConfigurationError

DIGEST_LENGTH = 16


class Settings(BaseSettings):
    """
    Настройки процесса

    Все значения читаются из переменных окружения или файла .env
    """
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Корень вывода; перекрывает paths.out_dir конфигурации, но не --out
    out_root: Optional[str] = Field(default=None, alias="XAI_CHEST_OUT")

    # Логирование
    log_level: str = Field(default="INFO", alias="XAI_CHEST_LOG_LEVEL")
    log_json: bool = Field(default=False, alias="XAI_CHEST_LOG_JSON")

    # Параллелизм и прогресс-бары
    workers: int = Field(default=1, ge=1, alias="XAI_CHEST_WORKERS")
    progress: bool = Field(default=False, alias="XAI_CHEST_PROGRESS")


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """
    Получение настроек (кэшируется)

    Returns:
        Объект Settings
    """
    return Settings()  # type: ignore[call-arg]


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def parse_experiment_config(data: Optional[dict[str, Any]]) -> ExperimentConfig:
    """Проверка словаря конфигурации; ошибки содержат пути полей через точку"""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("experiment config must be a mapping of sections")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(_format_validation_error(e)) from e


def load_experiment_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Загрузка YAML-конфигурации эксперимента

    Args:
        path: путь к YAML-файлу

    Returns:
        Проверенный ExperimentConfig
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"{path}: invalid YAML: {e}") from e
    return parse_experiment_config(data)


def canonical_config(config: ExperimentConfig) -> bytes:
    """Канонический вид: JSON с отсортированными ключами, числа через JSON-нормализацию"""
    return orjson.dumps(config.model_dump(mode="json", by_alias=True), option=orjson.OPT_SORT_KEYS)


def config_digest(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_config(config)).hexdigest()[:DIGEST_LENGTH]


def progress_enabled(settings: Settings, stream: Optional[Any] = None) -> bool:
    """Прогресс-бары только при XAI_CHEST_PROGRESS и выводе в терминал"""
    stream = sys.stderr if stream is None else stream
    isatty = getattr(stream, "isatty", None)
    return bool(settings.progress and callable(isatty) and isatty())


def resolve_out_dir(config: ExperimentConfig, out: Optional[str], settings: Settings) -> Path:
    """Корень вывода: --out > XAI_CHEST_OUT > paths.out_dir"""
    if out:
        return Path(out)
    if settings.out_root:
        return Path(settings.out_root)
    return Path(config.paths.out_dir)
