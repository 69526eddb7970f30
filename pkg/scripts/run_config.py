#!/usr/bin/env python3
"""
Схема конфигурации запуска и её источники.

Приоритет: значения по умолчанию < файл config.env < флаги командной строки.
Каждое поле схемы доступно как флаг --<секция>.<поле> (например --train.gamma).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Type

from pydantic import BaseModel, ValidationError

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.experiment import ExperimentConfig
from kge_models.fusion.fusion_model import FusionConfig
from scripts.config_loader import ConfigLoader, flatten, set_nested
from utils.errors import ConfigurationError
from utils.split_dataset import FederatedDataset, load_federated_dataset

EFFECTIVE_CONFIG_NAME = "effective_config.env"


class DataConfig(BaseModel):
    """Где лежит разбиение"""
    manifest: Optional[str] = None

    class Config:
        extra = "forbid"


class RunConfig(ExperimentConfig):
    """Конфигурация запуска: эксперимент плюс данные, вывод и слияние"""
    data: DataConfig = DataConfig()
    output_dir: str = "runs/fede"
    fusion: FusionConfig = FusionConfig()


def _is_section(field) -> bool:
    return isinstance(field.type_, type) and issubclass(field.type_, BaseModel)


def add_config_flags(parser: argparse.ArgumentParser, schema: Type[BaseModel] = RunConfig,
                     prefix: str = "") -> None:
    """Добавляет флаг --<секция>.<поле> для каждого поля схемы."""
    for name, field in schema.__fields__.items():
        key = f"{prefix}{name}"
        if _is_section(field):
            add_config_flags(parser, field.type_, f"{key}.")
        else:
            parser.add_argument(f"--{key}", dest=key, default=None, metavar="VALUE",
                                help=f"(по умолчанию {field.default})")


def collect_overrides(args: argparse.Namespace, schema: Type[BaseModel] = RunConfig) -> Dict[str, str]:
    """Значения флагов конфигурации, заданные явно."""
    values = vars(args)
    keys = flatten(_schema_tree(schema)).keys()
    return {key: values[key] for key in keys if values.get(key) is not None}


def _schema_tree(schema: Type[BaseModel]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for name, field in schema.__fields__.items():
        tree[name] = _schema_tree(field.type_) if _is_section(field) else None
    return tree


def load_run_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Собирает RunConfig из файла и флагов и проверяет его целиком.

    Args:
        config_path: Путь к config.env (None - только значения по умолчанию)
        overrides: {'train.gamma': '12', ...}

    Returns:
        RunConfig
    """
    nested: Dict[str, Any] = {}
    if config_path:
        nested = ConfigLoader(config_path).as_nested()
    for key, value in (overrides or {}).items():
        set_nested(nested, key, value)

    try:
        return RunConfig.parse_obj(nested)
    except (ValidationError, ValueError) as e:
        raise ConfigurationError(f"Некорректная конфигурация:\n{e}") from None


def dump_config(cfg: BaseModel) -> str:
    """Конфигурация в формате config.env (составные ключи, без пустых значений)."""
    lines = []
    for key, value in flatten(cfg.snapshot() if hasattr(cfg, "snapshot") else cfg.dict()).items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_effective_config(cfg: RunConfig, output_dir: Optional[str] = None) -> Path:
    output_dir = Path(output_dir or cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / EFFECTIVE_CONFIG_NAME
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dump_config(cfg))
    return path


def load_dataset(cfg: RunConfig, manifest: Optional[str] = None) -> FederatedDataset:
    path = manifest or cfg.data.manifest
    if not path:
        raise ConfigurationError("Не задан манифест разбиения (data.manifest)")
    if not Path(path).exists():
        raise ConfigurationError(f"Манифест {path} не найден")
    return load_federated_dataset(path)


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def add_common_flags(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    """--config, --verbose и все флаги схемы."""
    parser.add_argument('--config', '-c', default=None, help='Файл конфигурации (config.env)')
    parser.add_argument('--verbose', '-v', action='store_true', help='Подробный вывод')
    add_config_flags(parser)
    return parser


def config_parser(description: str) -> argparse.ArgumentParser:
    return add_common_flags(argparse.ArgumentParser(description=description))
