"""
Раунды FedE: выбор клиентов, раздача, локальное обучение, агрегация,
периодическая оценка и ранняя остановка.
"""

import logging
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, validator
from tqdm import tqdm

from federation.client import FedClient
from federation.messages import DistributeMessage, UpdateMessage
from federation.server import FedServer, distribute
from utils.errors import CheckpointError
from utils.metrics import Metrics, weighted_average
from utils.metrics_log import MetricsLog

logger = logging.getLogger(__name__)


class RoundConfig(BaseModel):
    """Параметры федеративного обучения"""
    fraction: float = 1.0
    local_epochs: int = 3
    batch_size: int = 512
    max_rounds: int = 1000
    eval_every: int = 5
    patience: int = 15

    class Config:
        extra = "forbid"

    @validator("fraction")
    def _fraction_range(cls, value: float) -> float:
        if not 0.0 < value <= 1.0:
            raise ValueError("доля клиентов F должна лежать в (0, 1]")
        return value

    @validator("batch_size", "eval_every")
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("значение должно быть > 0")
        return value

    @validator("local_epochs", "max_rounds", "patience")
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("значение должно быть >= 0")
        return value


@dataclass
class EarlyStopping:
    """
    Останов после patience подряд оценок без нового максимума
    (patience=0 - после первой же такой оценки).
    """
    patience: int
    best: float = float("-inf")
    best_round: int = -1
    bad_evals: int = 0

    def update(self, value: float, round_number: int) -> bool:
        if value > self.best:
            self.best, self.best_round, self.bad_evals = value, round_number, 0
            return True
        self.bad_evals += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_evals >= max(1, self.patience)

    def state_dict(self) -> Dict[str, float]:
        return {"best": self.best, "best_round": self.best_round, "bad_evals": self.bad_evals}

    def load_state_dict(self, state: Mapping[str, float]) -> None:
        self.best = float(state["best"])
        self.best_round = int(state["best_round"])
        self.bad_evals = int(state["bad_evals"])


@dataclass
class EvalRecord:
    """Результат одной точки оценки"""
    round: int
    per_client: Dict[int, Metrics]
    average: Metrics

    def to_json(self) -> Dict[str, object]:
        return {
            "round": self.round,
            "clients": {str(c): m.as_dict() for c, m in self.per_client.items()},
            "avg": self.average.as_dict(),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, object]) -> "EvalRecord":
        return cls(int(data["round"]), {int(c): Metrics(**m) for c, m in data["clients"].items()},
                   Metrics(**data["avg"]))


@dataclass
class Snapshot:
    """Параметры клиентов, на которых достигнут лучший результат"""
    rounds: Dict[int, int] = field(default_factory=dict)
    metrics: Dict[int, Metrics] = field(default_factory=dict)
    entities: Dict[int, np.ndarray] = field(default_factory=dict)
    relations: Dict[int, np.ndarray] = field(default_factory=dict)

    def store(self, client_id: int, round_number: int, metrics: Metrics,
              entities: np.ndarray, relations: np.ndarray) -> None:
        self.rounds[client_id] = round_number
        self.metrics[client_id] = metrics
        self.entities[client_id] = np.array(entities, dtype=np.float64)
        self.relations[client_id] = np.array(relations, dtype=np.float64)

    @property
    def average(self) -> Optional[Metrics]:
        if not self.metrics:
            return None
        return weighted_average([self.metrics[c] for c in sorted(self.metrics)])

    def state_dict(self, prefix: str = "best") -> Dict[str, object]:
        sections: Dict[str, object] = {
            f"{prefix}/meta": {
                "rounds": {str(c): r for c, r in self.rounds.items()},
                "metrics": {str(c): m.as_dict() for c, m in self.metrics.items()},
            }
        }
        for c in sorted(self.entities):
            sections[f"{prefix}/client_{c}/entities"] = self.entities[c]
            sections[f"{prefix}/client_{c}/relations"] = self.relations[c]
        return sections

    @classmethod
    def from_state_dict(cls, sections: Mapping[str, object], prefix: str = "best") -> "Snapshot":
        try:
            meta = sections[f"{prefix}/meta"]
            snapshot = cls()
            for key, round_number in meta["rounds"].items():
                c = int(key)
                snapshot.store(c, int(round_number), Metrics(**meta["metrics"][key]),
                               sections[f"{prefix}/client_{c}/entities"],
                               sections[f"{prefix}/client_{c}/relations"])
        except KeyError as e:
            raise CheckpointError(f"В чекпоинте нет секции {e}") from None
        return snapshot


@dataclass
class TrainResult:
    history: List[EvalRecord]
    best: Snapshot
    stopped_early: bool

    def average_history(self) -> List[tuple]:
        """[(раунд, средние метрики)] для rounds_to_threshold."""
        return [(r.round, r.average) for r in self.history]


def run_round(server: FedServer, clients: Mapping[int, FedClient], cfg: RoundConfig,
              executor: Optional[Executor] = None) -> List[int]:
    """
    Один раунд: выбор ⌈F·C⌉ клиентов, раздача, локальное обучение, агрегация.
    Сообщения проходят через байтовое представление, как при передаче по сети.

    Returns:
        Идентификаторы выбранных клиентов
    """
    selected = server.sample_clients(cfg.fraction)

    def work(client_id: int) -> UpdateMessage:
        incoming = DistributeMessage.from_bytes(server.distribute(client_id).to_bytes())
        update = clients[client_id].client_update(incoming, cfg.local_epochs, cfg.batch_size)
        return UpdateMessage.from_bytes(update.to_bytes())

    if executor is not None:
        updates = list(executor.map(work, selected))
    else:
        updates = [work(c) for c in selected]

    server.aggregate(updates, selected)
    logger.debug(f"Раунд {server.round}: клиенты {selected}")
    return selected


class FedTrainer:
    """
    Цикл train_federated с состоянием, которое можно сохранить и продолжить.

    Args:
        server: Сервер с зарегистрированными клиентами
        clients: client_id -> FedClient
        cfg: Параметры раундов
        directions: Направления запросов при оценке
        executor: Пул потоков для параллельного обучения выбранных клиентов
        metrics_log: Журнал метрик
        on_evaluation: Вызывается после каждой точки оценки
    """

    setting = "fed"

    def __init__(self, server: FedServer, clients: Mapping[int, FedClient], cfg: RoundConfig,
                 directions: str = "both", executor: Optional[Executor] = None,
                 metrics_log: Optional[MetricsLog] = None,
                 on_evaluation: Optional[Callable[["FedTrainer"], None]] = None, progress: bool = False):
        self.server = server
        self.clients = dict(clients)
        self.cfg = cfg
        self.directions = directions
        self.executor = executor
        self.metrics_log = metrics_log
        self.on_evaluation = on_evaluation
        self.progress = progress

        self.stopper = EarlyStopping(cfg.patience)
        self.history: List[EvalRecord] = []
        self.best = Snapshot()
        self.stopped = False

    @property
    def position(self) -> int:
        return self.server.round

    @property
    def model(self):
        return self.server.model

    def client_parameters(self, client_id: int):
        """Эмбеддинги клиента для оценки: свежие строки сервера и свои отношения."""
        return distribute(self.server.state, client_id), self.clients[client_id].relation_matrix

    def evaluate(self, split: str = "valid") -> EvalRecord:
        per_client = {}
        for c in sorted(self.clients):
            entities, _ = self.client_parameters(c)
            per_client[c] = self.clients[c].evaluate(split, self.directions, entities)
        average = weighted_average([per_client[c] for c in sorted(per_client)])
        return EvalRecord(self.server.round, per_client, average)

    def _checkpoint_evaluation(self) -> None:
        record = self.evaluate("valid")
        self.history.append(record)
        if self.metrics_log is not None:
            self.metrics_log.write_evaluation(record.round, "valid", record.per_client, record.average)

        if self.stopper.update(record.average.mrr, record.round):
            for c in sorted(self.clients):
                entities, relations = self.client_parameters(c)
                self.best.store(c, record.round, record.per_client[c], entities, relations)
        logger.info(f"Раунд {record.round}: valid MRR={record.average.mrr:.4f} "
                    f"(лучший {self.stopper.best:.4f} на раунде {self.stopper.best_round})")

        if self.stopper.should_stop:
            self.stopped = True
            logger.warning(f"Ранняя остановка на раунде {record.round}")
        if self.on_evaluation is not None:
            self.on_evaluation(self)

    def run(self) -> TrainResult:
        start = self.server.round
        iterator = range(start, self.cfg.max_rounds)
        if self.progress:
            iterator = tqdm(iterator, desc="rounds", initial=start, total=self.cfg.max_rounds)

        for _ in iterator:
            if self.stopped:
                break
            run_round(self.server, self.clients, self.cfg, self.executor)
            if self.server.round % self.cfg.eval_every == 0 or self.server.round == self.cfg.max_rounds:
                self._checkpoint_evaluation()

        return TrainResult(self.history, self.best, self.stopped)

    def state_dict(self) -> Dict[str, object]:
        sections: Dict[str, object] = {
            "trainer/progress": {
                "stopped": self.stopped,
                "stopper": self.stopper.state_dict(),
                "history": [r.to_json() for r in self.history],
            }
        }
        sections.update(self.server.state_dict())
        for c in sorted(self.clients):
            sections.update(self.clients[c].state_dict())
        sections.update(self.best.state_dict())
        return sections

    def load_state_dict(self, sections: Mapping[str, object]) -> None:
        progress = sections["trainer/progress"]
        self.stopped = bool(progress["stopped"])
        self.stopper.load_state_dict(progress["stopper"])
        self.history = [EvalRecord.from_json(r) for r in progress["history"]]
        self.server.load_state_dict(sections)
        for client in self.clients.values():
            client.load_state_dict(sections)
        self.best = Snapshot.from_state_dict(sections)


def train_federated(server: FedServer, clients: Mapping[int, FedClient], cfg: RoundConfig,
                    directions: str = "both", executor: Optional[Executor] = None,
                    metrics_log: Optional[MetricsLog] = None) -> TrainResult:
    """Раунды до ранней остановки или max_rounds; возвращает историю и лучший снимок."""
    return FedTrainer(server, clients, cfg, directions, executor, metrics_log).run()
