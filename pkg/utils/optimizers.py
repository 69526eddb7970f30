"""
Разреженные оптимизаторы для таблиц эмбеддингов.

Обновляются только строки, присутствующие в градиенте. Adam ленивый:
моменты и счётчик шагов ведутся построчно, поэтому строки, которые батч
не затронул, остаются неизменными вместе со своими моментами.
"""

from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, validator

from utils.errors import ContractViolation


class OptimizerConfig(BaseModel):
    """Параметры оптимизатора"""
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    variant: Literal["adam", "sgd"] = "adam"
    reset_each_round: bool = False

    class Config:
        extra = "forbid"

    @validator("lr")
    def _lr_positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("lr должен быть > 0")
        return value

    @validator("beta1", "beta2")
    def _beta_range(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError("β должен лежать в [0, 1)")
        return value


@dataclass
class SparseGrad:
    """Градиент по подмножеству строк матрицы: rows (k,), values (k, d)"""
    rows: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls, dim: int) -> "SparseGrad":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, dim)))

    def merged(self) -> "SparseGrad":
        """Суммирует повторяющиеся строки."""
        unique, inverse = np.unique(self.rows, return_inverse=True)
        if len(unique) == len(self.rows):
            order = np.argsort(self.rows, kind="stable")
            return SparseGrad(self.rows[order], self.values[order])
        values = np.zeros((len(unique), self.values.shape[1]))
        np.add.at(values, inverse, self.values)
        return SparseGrad(unique, values)

    def to_dense(self, num_rows: int) -> np.ndarray:
        dense = np.zeros((num_rows, self.values.shape[1]))
        np.add.at(dense, self.rows, self.values)
        return dense


@dataclass
class AdamState:
    """Первый и второй моменты и построчные счётчики шагов"""
    m: np.ndarray
    v: np.ndarray
    steps: np.ndarray

    @classmethod
    def zeros(cls, shape: Tuple[int, int]) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape[0], dtype=np.int64))

    def reset(self) -> None:
        self.m.fill(0.0)
        self.v.fill(0.0)
        self.steps.fill(0)


def step(params: np.ndarray, grad: SparseGrad, state: AdamState,
         cfg: OptimizerConfig) -> Tuple[np.ndarray, AdamState]:
    """
    Один шаг оптимизатора по затронутым строкам (на месте).

    Args:
        params: Матрица параметров (n, d)
        grad: Разреженный градиент
        state: Состояние Adam той же формы (для SGD не используется)
        cfg: Конфигурация оптимизатора

    Returns:
        (params, state)
    """
    if grad.values.ndim != 2 or grad.values.shape[1] != params.shape[1] or len(grad.rows) != len(grad.values):
        raise ContractViolation(f"Форма градиента {grad.values.shape} не совпадает с параметрами {params.shape}")
    if state.m.shape != params.shape:
        raise ContractViolation(f"Форма состояния {state.m.shape} не совпадает с параметрами {params.shape}")
    if len(grad.rows) == 0:
        return params, state
    if grad.rows.min() < 0 or grad.rows.max() >= params.shape[0]:
        raise ContractViolation("Индекс строки градиента вне диапазона")

    grad = grad.merged()
    rows, g = grad.rows, grad.values

    if cfg.variant == "sgd":
        params[rows] -= cfg.lr * g
    else:
        state.steps[rows] += 1
        t = state.steps[rows][:, None].astype(np.float64)

        m = cfg.beta1 * state.m[rows] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[rows] + (1.0 - cfg.beta2) * g * g
        state.m[rows] = m
        state.v[rows] = v

        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        params[rows] -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

    if not np.isfinite(params[rows]).all():
        raise FloatingPointError("Нечисловые значения параметров после шага оптимизатора")
    return params, state
