"""
Клиент федерации: локальные эмбеддинги, обучение на своей части графа и оценка.

Матрица отношений и триплеты никогда не покидают клиента; наружу уходят
только метки сущностей (при регистрации) и матрица сущностей (после обучения).
"""

import logging
from typing import Dict, Mapping, Optional

import numpy as np

from federation.messages import DistributeMessage, RegisterMessage, UpdateMessage
from federation.seeding import ENTITY_STREAM, RELATION_STREAM, TRAIN_STREAM, make_rng, restore_rng, rng_state
from kge_models.base import BaseKGEModel, TrainHyper
from kge_models.loss import loss, loss_and_grad
from kge_models.sampling import NegativeBatch, sample_negative_batch
from kge_models.scorer import KGEScorer
from utils.errors import ContractViolation
from utils.metrics import FilterIndex, Metrics, evaluate
from utils.optimizers import AdamState, OptimizerConfig, step
from utils.split_dataset import ClientShard

logger = logging.getLogger(__name__)


class FedClient:
    """
    Состояние одного клиента.

    Args:
        shard: Данные клиента в локальных индексах
        model: Функция оценки
        hyper: Гиперпараметры обучения
        optimizer: Конфигурация оптимизатора
        seed: Зерно эксперимента
        init_scope: Область потока инициализации сущностей (по умолчанию client_id)
    """

    def __init__(self, shard: ClientShard, model: BaseKGEModel, hyper: TrainHyper,
                 optimizer: OptimizerConfig, seed: int, init_scope: Optional[int] = None):
        self.shard = shard
        self.client_id = shard.client_id
        self.model = model
        self.hyper = hyper
        self.optimizer = optimizer

        model.check_dim(hyper.dim)
        scope = self.client_id if init_scope is None else init_scope
        self.entity_matrix = model.init_entities(shard.num_entities, hyper.dim, make_rng(seed, ENTITY_STREAM, scope))
        self.relation_matrix = model.init_relations(shard.num_relations, hyper.dim,
                                                    make_rng(seed, RELATION_STREAM, scope))
        self.entity_state = AdamState.zeros(self.entity_matrix.shape)
        self.relation_state = AdamState.zeros(self.relation_matrix.shape)
        self.rng = make_rng(seed, TRAIN_STREAM, scope)

        self.filter_index = FilterIndex.from_shard(shard)
        self._known = shard.train if hyper.strict_negatives else None

    def register(self) -> RegisterMessage:
        return RegisterMessage(self.client_id, list(self.shard.vocab.entities))

    def receive(self, message: DistributeMessage) -> None:
        """Заменяет локальные эмбеддинги сущностей присланными сервером."""
        if message.client_id != self.client_id:
            raise ContractViolation(f"Сообщение для клиента {message.client_id} пришло клиенту {self.client_id}")
        self.set_entities(message.matrix)
        if self.optimizer.reset_each_round:
            self.entity_state.reset()
            self.relation_state.reset()

    def set_entities(self, matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != self.entity_matrix.shape:
            raise ContractViolation(f"Клиент {self.client_id}: форма {matrix.shape}, ожидалась {self.entity_matrix.shape}")
        self.entity_matrix = matrix.copy()

    def train_batch(self, positives: np.ndarray, negatives: Optional[NegativeBatch] = None) -> float:
        """Шаг оптимизатора на батче; без negatives они выбираются из своего генератора."""
        if negatives is None:
            negatives = sample_negative_batch(positives, self.shard.num_entities, self.hyper.n_neg, self.rng,
                                              self.hyper.corruption, self._known)
        value, entity_grad, relation_grad = loss_and_grad(self.model, positives, negatives, self.entity_matrix,
                                                          self.relation_matrix, self.hyper)
        step(self.entity_matrix, entity_grad, self.entity_state, self.optimizer)
        step(self.relation_matrix, relation_grad, self.relation_state, self.optimizer)
        return value

    def train_epochs(self, epochs: int, batch_size: int) -> Optional[float]:
        """
        Эпохи мини-батчевого обучения на train клиента.

        Returns:
            Средние потери последней эпохи (None, если обучения не было)
        """
        train = self.shard.train.array
        if len(train) == 0:
            if epochs > 0:
                logger.warning(f"Клиент {self.client_id}: пустой train, обучение пропущено")
            return None

        last = None
        for _ in range(epochs):
            order = self.rng.permutation(len(train))
            losses = [self.train_batch(train[order[s:s + batch_size]]) for s in range(0, len(order), batch_size)]
            last = float(np.mean(losses))
        return last

    def client_update(self, incoming: DistributeMessage, epochs: int, batch_size: int) -> UpdateMessage:
        """Принимает эмбеддинги сервера, обучается и возвращает обновление."""
        self.receive(incoming)
        self.train_epochs(epochs, batch_size)
        return UpdateMessage(incoming.round_number, self.client_id, self.entity_matrix.copy())

    def train_loss(self, rng: np.random.Generator) -> float:
        """Потери на всём train при негативах из переданного генератора (для контроля обучения)."""
        train = self.shard.train.array
        negatives = sample_negative_batch(train, self.shard.num_entities, self.hyper.n_neg, rng, self.hyper.corruption)
        return loss(self.model, train, negatives, self.entity_matrix, self.relation_matrix, self.hyper)

    def scorer(self, entity_matrix: Optional[np.ndarray] = None) -> KGEScorer:
        return KGEScorer(self.model, self.entity_matrix if entity_matrix is None else entity_matrix,
                         self.relation_matrix)

    def evaluate(self, split: str = "valid", directions: str = "both",
                 entity_matrix: Optional[np.ndarray] = None) -> Metrics:
        """Метрики на своей части разбиения (entity_matrix - например свежие строки сервера)."""
        return evaluate(self.scorer(entity_matrix), self.shard.split(split), self.filter_index, directions)

    def state_dict(self) -> Dict[str, object]:
        prefix = f"client_{self.client_id}"
        return {
            f"{prefix}/entities": self.entity_matrix,
            f"{prefix}/relations": self.relation_matrix,
            f"{prefix}/entity_m": self.entity_state.m,
            f"{prefix}/entity_v": self.entity_state.v,
            f"{prefix}/entity_steps": self.entity_state.steps,
            f"{prefix}/relation_m": self.relation_state.m,
            f"{prefix}/relation_v": self.relation_state.v,
            f"{prefix}/relation_steps": self.relation_state.steps,
            f"{prefix}/rng": rng_state(self.rng),
        }

    def load_state_dict(self, sections: Mapping[str, object]) -> None:
        prefix = f"client_{self.client_id}"

        def array(name: str, like: np.ndarray) -> np.ndarray:
            value = np.asarray(sections[f"{prefix}/{name}"], dtype=like.dtype)
            if value.shape != like.shape:
                raise ContractViolation(f"{prefix}/{name}: форма {value.shape}, ожидалась {like.shape}")
            return value.copy()

        self.entity_matrix = array("entities", self.entity_matrix)
        self.relation_matrix = array("relations", self.relation_matrix)
        self.entity_state = AdamState(array("entity_m", self.entity_state.m), array("entity_v", self.entity_state.v),
                                      array("entity_steps", self.entity_state.steps))
        self.relation_state = AdamState(array("relation_m", self.relation_state.m),
                                        array("relation_v", self.relation_state.v),
                                        array("relation_steps", self.relation_state.steps))
        restore_rng(self.rng, sections[f"{prefix}/rng"])
