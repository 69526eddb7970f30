#!/usr/bin/env python3
"""
Модуль для загрузки конфигурации из файла окружения
"""

from pathlib import Path
from typing import Any, Dict, Mapping

from utils.errors import ConfigurationError


def set_nested(target: Dict[str, Any], dotted_key: str, value: Any) -> None:
    """Кладёт значение по ключу вида 'train.gamma' во вложенный словарь."""
    parts = dotted_key.split('.')
    if not all(parts):
        raise ConfigurationError(f"Некорректный ключ конфигурации: '{dotted_key}'")
    node = target
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"Ключ {dotted_key} конфликтует со скалярным значением {part}")
    if isinstance(node.get(parts[-1]), dict):
        raise ConfigurationError(f"Ключ {dotted_key} задаёт значение целой секции")
    node[parts[-1]] = value


def flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Обратное преобразование: вложенный словарь -> {'train.gamma': 10, ...}."""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


class ConfigLoader:
    """Чтение config.env со строками вида `секция.поле = значение`."""

    def __init__(self, config_file: str = "config.env"):
        """
        Args:
            config_file: Путь к файлу конфигурации
        """
        self.config_file = config_file
        self.config: Dict[str, str] = {}
        self._load_config()

    def _load_config(self) -> None:
        config_path = Path(self.config_file)
        if not config_path.exists():
            raise FileNotFoundError(f"Файл конфигурации {self.config_file} не найден")

        with open(config_path, 'r', encoding='utf-8') as f:
            for line_no, raw in enumerate(f, start=1):
                line = raw.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigurationError(f"{self.config_file}:{line_no}: ожидалась строка вида ключ = значение")

                key, value = (part.strip() for part in line.split('=', 1))
                if not key:
                    raise ConfigurationError(f"{self.config_file}:{line_no}: пустой ключ")
                if key in self.config:
                    raise ConfigurationError(f"{self.config_file}:{line_no}: ключ {key} задан повторно")
                # Пустое значение оставляет значение по умолчанию
                if value:
                    self.config[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def as_nested(self) -> Dict[str, Any]:
        """
        Конфигурация в виде вложенного словаря по составным ключам.

        Returns:
            {'train': {'gamma': '10'}, 'seed': '0', ...}
        """
        nested: Dict[str, Any] = {}
        for key, value in self.config.items():
            set_nested(nested, key, value)
        return nested
