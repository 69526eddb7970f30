"""
Базовый класс для всех моделей эмбеддингов графа знаний.
Определяет общий интерфейс: функция оценки f_r(h, t), её аналитический
градиент и инициализацию параметров.
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, validator

from utils.errors import ContractViolation

# Ограничение на число элементов промежуточного массива при оценке кандидатов
CHUNK_ELEMENTS = 1 << 22


class ModelKind(str, Enum):
    TRANSE = "TransE"
    DISTMULT = "DistMult"
    COMPLEX = "ComplEx"
    ROTATE = "RotatE"


class TrainHyper(BaseModel):
    """
    Гиперпараметры обучения эмбеддингов.

    margin_mode: форма отступа в функции потерь
        subtract - -log σ(f - γ) - Σ p log σ(γ - f')
        offset   - -log σ(γ + f) - Σ p log σ(-γ - f')
        auto     - subtract для DistMult/ComplEx, offset для TransE/RotatE
    corruption: both - чередование головы/хвоста по позиции в батче, tail - только хвост
    strict_negatives: отбрасывать негативы, совпадающие с известными триплетами
    """
    gamma: float = 10.0
    alpha: float = 1.0
    n_neg: int = 256
    dim: int = 256
    p_norm: int = 2
    margin_mode: Literal["auto", "subtract", "offset"] = "auto"
    corruption: Literal["both", "tail"] = "both"
    strict_negatives: bool = False

    class Config:
        extra = "forbid"

    @validator("alpha")
    def _alpha_non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("температура α должна быть >= 0")
        return value

    @validator("p_norm")
    def _norm_order(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError("порядок нормы TransE должен быть 1 или 2")
        return value

    @validator("n_neg", "dim")
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("значение должно быть > 0")
        return value


def split_complex(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Вещественные и мнимые части из чередующегося представления."""
    return x[..., 0::2], x[..., 1::2]


def join_complex(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    out = np.empty(re.shape[:-1] + (2 * re.shape[-1],))
    out[..., 0::2] = re
    out[..., 1::2] = im
    return out


class BaseKGEModel(ABC):
    """Базовый класс для всех функций оценки."""

    kind: ModelKind
    is_distance: bool = False

    def relation_dim(self, dim: int) -> int:
        """Размерность строки отношения для размерности сущностей dim."""
        return dim

    def check_dim(self, dim: int) -> None:
        if dim <= 0:
            raise ContractViolation(f"{self.kind.value}: размерность должна быть > 0")

    def init_entities(self, num: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        bound = 0.5 / np.sqrt(dim)
        return rng.uniform(-bound, bound, size=(num, dim))

    def init_relations(self, num: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        bound = 0.5 / np.sqrt(dim)
        return rng.uniform(-bound, bound, size=(num, self.relation_dim(dim)))

    def margin_shift(self, gamma: float, margin_mode: str) -> float:
        """
        Сдвиг δ в логитах потерь: позитив σ(f + δ), негатив σ(-(f' + δ)).
        """
        if margin_mode == "auto":
            margin_mode = "offset" if self.is_distance else "subtract"
        return gamma if margin_mode == "offset" else -gamma

    def score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        """
        f_r(h, t) для одной тройки строк или для батчей с совместимыми формами.
        """
        h, r, t = np.asarray(h, dtype=np.float64), np.asarray(r, dtype=np.float64), np.asarray(t, dtype=np.float64)
        dim = h.shape[-1]
        if t.shape[-1] != dim or r.shape[-1] != self.relation_dim(dim):
            raise ContractViolation(
                f"{self.kind.value}: несовместимые размерности h={h.shape}, r={r.shape}, t={t.shape}")
        self.check_dim(dim)
        return self._score(h, r, t)

    def score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                   ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Значение f и частные производные df/dh, df/dr, df/dt.
        Все входы одной формы (N, d) / (N, d_r).
        """
        return self._score_grad(h, r, t)

    def score_candidates(self, anchors: np.ndarray, rels: np.ndarray,
                         candidates: np.ndarray, side: str) -> np.ndarray:
        """
        Оценки всех кандидатов для запросов (h, r, ?) или (?, r, t).

        Args:
            anchors: Известные сущности запросов (Q, d)
            rels: Отношения запросов (Q, d_r)
            candidates: Кандидаты (n, d)
            side: 'tail' - кандидаты подставляются в хвост, 'head' - в голову

        Returns:
            Матрица оценок (Q, n)
        """
        q, n = len(anchors), len(candidates)
        out = np.empty((q, n))
        chunk = max(1, CHUNK_ELEMENTS // max(1, n * candidates.shape[1]))

        for start in range(0, q, chunk):
            a = anchors[start:start + chunk, None, :]
            r = rels[start:start + chunk, None, :]
            c = candidates[None, :, :]
            if side == "tail":
                out[start:start + chunk] = self._score(a, r, c)
            elif side == "head":
                out[start:start + chunk] = self._score(c, r, a)
            else:
                raise ContractViolation(f"Неизвестная сторона запроса: {side}")
        return out

    @abstractmethod
    def _score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


def get_model(kind, p_norm: int = 2) -> BaseKGEModel:
    """Создаёт модель по названию."""
    from kge_models.complex.complex_model import ComplExModel
    from kge_models.distmult.distmult_model import DistMultModel
    from kge_models.rotate.rotate_model import RotatEModel
    from kge_models.transe.transe_model import TransEModel

    kind = ModelKind(kind)
    if kind is ModelKind.TRANSE:
        return TransEModel(p_norm)
    if kind is ModelKind.DISTMULT:
        return DistMultModel()
    if kind is ModelKind.COMPLEX:
        return ComplExModel()
    return RotatEModel()
