"""
Оценщики триплетов в локальных индексах клиента.

Любой оценщик умеет две вещи: оценить список триплетов и оценить все
локальные сущности клиента как кандидатов для запросов (h, r, ?) / (?, r, t).
Этого достаточно для ранжирования и для обучения слияния.
"""

from typing import Optional

import numpy as np

from kge_models.base import BaseKGEModel
from utils.errors import ContractViolation


class KGEScorer:
    """
    Оценщик на основе функции оценки и матриц эмбеддингов.

    Если заданы entity_rows / relation_rows, локальный индекс i соответствует
    строке entity_rows[i] матрицы (так оценивается общая модель Entire
    в словаре конкретного клиента).
    """

    def __init__(self, model: BaseKGEModel, entity_matrix: np.ndarray, relation_matrix: np.ndarray,
                 entity_rows: Optional[np.ndarray] = None, relation_rows: Optional[np.ndarray] = None):
        self.model = model
        self.entity_matrix = entity_matrix
        self.relation_matrix = relation_matrix
        self.entity_rows = None if entity_rows is None else np.asarray(entity_rows, dtype=np.int64)
        self.relation_rows = None if relation_rows is None else np.asarray(relation_rows, dtype=np.int64)

    @classmethod
    def remapped(cls, model: BaseKGEModel, entity_matrix: np.ndarray, relation_matrix: np.ndarray,
                 entity_rows: np.ndarray, relation_rows: np.ndarray) -> "KGEScorer":
        return cls(model, entity_matrix, relation_matrix, entity_rows, relation_rows)

    @property
    def num_entities(self) -> int:
        return len(self.entity_matrix) if self.entity_rows is None else len(self.entity_rows)

    def _entities(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.num_entities):
            raise ContractViolation("Индекс сущности вне словаря оценщика")
        rows = ids if self.entity_rows is None else self.entity_rows[ids]
        return self.entity_matrix[rows]

    def _relations(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        rows = ids if self.relation_rows is None else self.relation_rows[ids]
        return self.relation_matrix[rows]

    def candidate_matrix(self) -> np.ndarray:
        return self.entity_matrix if self.entity_rows is None else self.entity_matrix[self.entity_rows]

    def score_triples(self, triples: np.ndarray) -> np.ndarray:
        """Оценки триплетов (..., 3) -> (...)."""
        triples = np.asarray(triples, dtype=np.int64)
        return self.model.score(self._entities(triples[..., 0]), self._relations(triples[..., 1]),
                                self._entities(triples[..., 2]))

    def score_queries(self, anchors: np.ndarray, relations: np.ndarray, side: str) -> np.ndarray:
        """
        Оценки всех локальных сущностей как кандидатов.

        Args:
            anchors: Известные сущности запросов (Q,)
            relations: Отношения запросов (Q,)
            side: 'tail' для (h, r, ?), 'head' для (?, r, t)

        Returns:
            (Q, num_entities)
        """
        return self.model.score_candidates(self._entities(anchors), self._relations(relations),
                                           self.candidate_matrix(), side)
