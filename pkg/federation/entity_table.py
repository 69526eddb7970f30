"""
Таблица сущностей сервера: общий словарь и отображения локальных индексов
клиентов в глобальные. Матрица перестановки клиента задаётся массивом
индексов idx_c: локальная строка j -> глобальная строка idx_c[j].
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from utils.errors import ContractViolation


@dataclass
class EntityTable:
    labels: List[str]
    label_index: Dict[str, int]
    client_ids: List[int]
    index_maps: List[np.ndarray]

    @property
    def num_entities(self) -> int:
        return len(self.labels)

    @property
    def num_clients(self) -> int:
        return len(self.client_ids)

    def position(self, client_id: int) -> int:
        try:
            return self.client_ids.index(client_id)
        except ValueError:
            raise ContractViolation(f"Неизвестный клиент: {client_id}") from None

    def index_map(self, client_id: int) -> np.ndarray:
        return self.index_maps[self.position(client_id)]

    def existence_mask(self, client_id: int) -> np.ndarray:
        """v_c: True на глобальных позициях сущностей клиента."""
        mask = np.zeros(self.num_entities, dtype=bool)
        mask[self.index_map(client_id)] = True
        return mask

    def permutation_matrix(self, client_id: int) -> np.ndarray:
        """Плотная P_c (n × n_c) с P[idx_c[j], j] = 1; только для проверок на малых n."""
        idx = self.index_map(client_id)
        matrix = np.zeros((self.num_entities, len(idx)))
        matrix[idx, np.arange(len(idx))] = 1.0
        return matrix

    def owner_counts(self, client_ids: Sequence[int]) -> np.ndarray:
        """Сколько из перечисленных клиентов владеет каждой глобальной сущностью."""
        counts = np.zeros(self.num_entities, dtype=np.int64)
        for c in client_ids:
            counts[self.index_map(c)] += 1
        return counts


def build_entity_table(client_labels: Sequence[Sequence[str]], client_ids: Sequence[int] = None) -> EntityTable:
    """
    Объединяет наборы меток клиентов в порядке первого появления
    (порядок клиентов, затем локальный порядок).

    Args:
        client_labels: Метки сущностей каждого клиента в локальном порядке
        client_ids: Идентификаторы клиентов (по умолчанию 0..C-1)

    Returns:
        EntityTable
    """
    if not client_labels:
        raise ContractViolation("Нужен хотя бы один клиент")
    client_ids = list(range(len(client_labels))) if client_ids is None else list(client_ids)
    if len(client_ids) != len(client_labels) or len(set(client_ids)) != len(client_ids):
        raise ContractViolation("Идентификаторы клиентов должны быть уникальны и соответствовать словарям")

    labels: List[str] = []
    label_index: Dict[str, int] = {}
    index_maps = []
    for c, local in zip(client_ids, client_labels):
        if len(local) == 0:
            raise ContractViolation(f"Клиент {c} не сообщил ни одной сущности")
        if len(set(local)) != len(local):
            raise ContractViolation(f"Клиент {c}: повторяющиеся метки сущностей")
        idx = np.empty(len(local), dtype=np.int64)
        for j, label in enumerate(local):
            if label not in label_index:
                label_index[label] = len(labels)
                labels.append(label)
            idx[j] = label_index[label]
        index_maps.append(idx)

    return EntityTable(labels, label_index, client_ids, index_maps)
