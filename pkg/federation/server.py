"""
Сервер федерации: таблица сущностей, раздача и агрегация эмбеддингов.

Интерфейс сервера принимает только наборы меток сущностей (REGISTER)
и матрицы сущностей (UPDATE); триплеты и отношения клиентов сюда не попадают.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence

import numpy as np

from federation.entity_table import EntityTable, build_entity_table
from federation.messages import DistributeMessage, RegisterMessage, UpdateMessage
from federation.seeding import ENTITY_STREAM, SERVER_STREAM, make_rng, restore_rng, rng_state
from kge_models.base import BaseKGEModel
from utils.errors import ContractViolation

logger = logging.getLogger(__name__)


@dataclass
class ServerState:
    entity_matrix: np.ndarray
    round: int
    table: EntityTable
    rng: np.random.Generator


def distribute(state: ServerState, client_id: int) -> np.ndarray:
    """Локальная матрица клиента: строка j = глобальная строка idx_c[j]."""
    return state.entity_matrix[state.table.index_map(client_id)]


def aggregate(table: EntityTable, updates: Mapping[int, np.ndarray], selected: Sequence[int],
              previous: np.ndarray) -> np.ndarray:
    """
    Усреднение строк сущностей по выбранным клиентам, которые ими владеют.

    Args:
        table: Таблица сущностей
        updates: client_id -> локальная матрица сущностей после обучения
        selected: Выбранные в раунде клиенты
        previous: Текущая глобальная матрица

    Returns:
        Новая глобальная матрица; строки, которыми не владеет ни один
        выбранный клиент, сохраняются без изменений
    """
    if set(updates) != set(selected):
        raise ContractViolation(f"Обновления {sorted(updates)} не совпадают с выбранными клиентами {sorted(selected)}")

    sums = np.zeros_like(previous)
    for c in selected:
        idx = table.index_map(c)
        update = np.asarray(updates[c], dtype=np.float64)
        if update.shape != (len(idx), previous.shape[1]):
            raise ContractViolation(f"Клиент {c}: форма обновления {update.shape}, ожидалась {(len(idx), previous.shape[1])}")
        sums[idx] += update

    counts = table.owner_counts(selected)
    owned = counts > 0
    result = previous.copy()
    result[owned] = (1.0 / counts[owned])[:, None] * sums[owned]
    return result


class FedServer:
    """Сервер FedE"""

    def __init__(self, model: BaseKGEModel, dim: int, seed: int):
        self.model = model
        self.dim = dim
        self.seed = seed
        self.state: ServerState = None

    @property
    def table(self) -> EntityTable:
        return self.state.table

    @property
    def round(self) -> int:
        return self.state.round

    def register(self, messages: Sequence[RegisterMessage]) -> EntityTable:
        """Строит таблицу сущностей и случайно инициализирует E_0."""
        table = build_entity_table([m.labels for m in messages], [m.client_id for m in messages])
        matrix = self.model.init_entities(table.num_entities, self.dim, make_rng(self.seed, ENTITY_STREAM, 0))
        self.state = ServerState(matrix, 0, table, make_rng(self.seed, SERVER_STREAM))
        logger.info(f"Сервер: {table.num_clients} клиентов, {table.num_entities} сущностей")
        return table

    def sample_clients(self, fraction: float) -> List[int]:
        """⌈F·C⌉ различных клиентов, равномерно без возвращения."""
        ids = self.table.client_ids
        count = max(1, math.ceil(fraction * len(ids) - 1e-9))
        chosen = self.state.rng.choice(len(ids), size=min(count, len(ids)), replace=False)
        return [ids[i] for i in sorted(chosen.tolist())]

    def distribute(self, client_id: int) -> DistributeMessage:
        return DistributeMessage(self.round, client_id, distribute(self.state, client_id))

    def aggregate(self, updates: Sequence[UpdateMessage], selected: Sequence[int]) -> np.ndarray:
        """Агрегирует обновления раунда и увеличивает счётчик раундов."""
        by_client: Dict[int, np.ndarray] = {}
        for message in updates:
            if message.round_number != self.round:
                raise ContractViolation(f"Обновление клиента {message.client_id} от раунда {message.round_number}, "
                                        f"текущий раунд {self.round}")
            by_client[message.client_id] = message.matrix

        matrix = aggregate(self.table, by_client, selected, self.state.entity_matrix)
        if not np.isfinite(matrix).all():
            raise FloatingPointError("Нечисловые значения в глобальной матрице сущностей")
        self.state.entity_matrix = matrix
        self.state.round += 1
        return matrix

    def state_dict(self) -> Dict[str, object]:
        return {
            "server/entities": self.state.entity_matrix,
            "server/progress": {"round": self.state.round, "rng": rng_state(self.state.rng)},
        }

    def load_state_dict(self, sections: Mapping[str, object]) -> None:
        matrix = np.asarray(sections["server/entities"], dtype=np.float64)
        if matrix.shape != self.state.entity_matrix.shape:
            raise ContractViolation(f"Форма матрицы сервера {matrix.shape} не совпадает с {self.state.entity_matrix.shape}")
        self.state.entity_matrix = matrix.copy()
        progress = sections["server/progress"]
        self.state.round = int(progress["round"])
        restore_rng(self.state.rng, progress["rng"])
