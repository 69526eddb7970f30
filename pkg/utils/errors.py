"""
Исключения проекта.
Скрипты ловят их на верхнем уровне и печатают понятное сообщение.
"""

from typing import Optional


class KGParseError(ValueError):
    """Некорректная строка в файле триплетов."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class UnknownLabelError(KeyError):
    """Метка отсутствует в замороженном словаре."""

    def __init__(self, label: str, kind: str = "entity", line_number: Optional[int] = None):
        self.label = label
        self.kind = kind
        self.line_number = line_number
        where = f" (строка {line_number})" if line_number is not None else ""
        super().__init__(f"Неизвестная метка {kind} '{label}'{where}")


class ConfigurationError(ValueError):
    """Некорректная конфигурация эксперимента или разбиения."""


class ContractViolation(ValueError):
    """Нарушение контракта: размерности, диапазоны индексов, неизвестный клиент."""


class CheckpointError(ValueError):
    """Повреждённый или несовместимый файл чекпоинта."""
