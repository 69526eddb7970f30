"""
Эксперименты в трёх постановках:

- single: каждый клиент обучается независимо на своих данных
- entire: данные всех клиентов объединяются, одна модель, оценка по клиентам
- fed:    протокол FedE

Плюс сохранение лучших параметров, продолжение из чекпоинта, оценка
чекпоинта и слияние моделей single и fed.
"""

import json
import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, validator
from tqdm import tqdm

from federation.client import FedClient
from federation.messages import RegisterMessage
from federation.rounds import EarlyStopping, EvalRecord, FedTrainer, RoundConfig, Snapshot, TrainResult
from federation.seeding import (ENTITY_STREAM, FUSION_STREAM, RELATION_STREAM, TRAIN_STREAM, make_rng, restore_rng,
                                rng_state)
from federation.server import FedServer
from kge_models.base import BaseKGEModel, ModelKind, TrainHyper, get_model
from kge_models.fusion.fusion_model import FusionConfig, FusionModel, select_weights, train_fusion
from kge_models.sampling import NegativeBatch, sample_negative_batch
from kge_models.scorer import KGEScorer
from utils.checkpoint import load_checkpoint, save_checkpoint
from utils.errors import CheckpointError, ConfigurationError
from utils.merge_datasets import pool_shards
from utils.metrics import FilterIndex, Metrics, evaluate, weighted_average
from utils.metrics_log import MetricsLog
from utils.optimizers import OptimizerConfig
from utils.split_dataset import ClientShard, FederatedDataset

logger = logging.getLogger(__name__)

METRICS_LOG_NAME = "metrics.tsv"
BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"


class LocalConfig(BaseModel):
    """Эпохи обучения в постановках single и entire"""
    max_epochs: int = 1000
    eval_every: int = 10
    patience: int = 15

    class Config:
        extra = "forbid"

    @validator("eval_every")
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("значение должно быть > 0")
        return value

    @validator("max_epochs", "patience")
    def _non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("значение должно быть >= 0")
        return value


class ExperimentConfig(BaseModel):
    """Всё, что определяет обучение и его результат"""
    setting: Literal["single", "entire", "fed"] = "fed"
    model: ModelKind = ModelKind.TRANSE
    seed: int = 0
    threads: int = 1
    directions: Literal["tail", "head", "both"] = "both"
    train: TrainHyper = TrainHyper()
    optimizer: OptimizerConfig = OptimizerConfig()
    rounds: RoundConfig = RoundConfig()
    local: LocalConfig = LocalConfig()

    class Config:
        extra = "forbid"

    @validator("seed")
    def _seed_non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("seed должен быть >= 0")
        return value

    @validator("threads")
    def _threads_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("число потоков должно быть >= 1")
        return value

    def snapshot(self) -> Dict[str, object]:
        """Конфигурация как JSON-совместимый словарь."""
        return json.loads(self.json())


def build_model(cfg: ExperimentConfig) -> BaseKGEModel:
    model = get_model(cfg.model, cfg.train.p_norm)
    model.check_dim(cfg.train.dim)
    return model


class _EpochTrainer:
    """Общий цикл single/entire: блоки по eval_every эпох, затем оценка."""

    setting = ""

    def __init__(self, dataset: FederatedDataset, model: BaseKGEModel, cfg: ExperimentConfig,
                 executor: Optional[Executor] = None, metrics_log: Optional[MetricsLog] = None,
                 on_evaluation: Optional[Callable[["_EpochTrainer"], None]] = None, progress: bool = False):
        self.dataset = dataset
        self.model = model
        self.cfg = cfg
        self.executor = executor
        self.metrics_log = metrics_log
        self.on_evaluation = on_evaluation
        self.progress = progress

        self.epoch = 0
        self.history: List[EvalRecord] = []
        self.best = Snapshot()
        self.stopped = False

    @property
    def position(self) -> int:
        return self.epoch

    def _train_block(self, epochs: int) -> None:
        raise NotImplementedError

    def _evaluate_point(self) -> Optional[EvalRecord]:
        raise NotImplementedError

    def _progress_state(self) -> Dict[str, object]:
        return {}

    def _load_progress_state(self, state: Mapping[str, object]) -> None:
        pass

    def run(self) -> TrainResult:
        local = self.cfg.local
        bar = tqdm(total=local.max_epochs, initial=self.epoch, desc=self.setting) if self.progress else None

        while self.epoch < local.max_epochs and not self.stopped:
            block = min(local.eval_every, local.max_epochs - self.epoch)
            self._train_block(block)
            self.epoch += block
            if bar is not None:
                bar.update(block)

            record = self._evaluate_point()
            self.history.append(record)
            if self.metrics_log is not None:
                self.metrics_log.write_evaluation(record.round, "valid", record.per_client, record.average)
            logger.info(f"Эпоха {record.round}: valid MRR={record.average.mrr:.4f}")
            if self.on_evaluation is not None:
                self.on_evaluation(self)

        if bar is not None:
            bar.close()
        return TrainResult(self.history, self.best, self.stopped)

    def state_dict(self) -> Dict[str, object]:
        progress = {"epoch": self.epoch, "stopped": self.stopped, "history": [r.to_json() for r in self.history]}
        progress.update(self._progress_state())
        sections: Dict[str, object] = {"trainer/progress": progress}
        for client in self.trained_clients():
            sections.update(client.state_dict())
        sections.update(self.best.state_dict())
        return sections

    def load_state_dict(self, sections: Mapping[str, object]) -> None:
        progress = sections["trainer/progress"]
        self.epoch = int(progress["epoch"])
        self.stopped = bool(progress["stopped"])
        self.history = [EvalRecord.from_json(r) for r in progress["history"]]
        self._load_progress_state(progress)
        for client in self.trained_clients():
            client.load_state_dict(sections)
        self.best = Snapshot.from_state_dict(sections)

    def trained_clients(self) -> List[FedClient]:
        raise NotImplementedError


class SingleTrainer(_EpochTrainer):
    """Независимое обучение клиентов; у каждого своя ранняя остановка."""

    setting = "single"

    def __init__(self, dataset: FederatedDataset, model: BaseKGEModel, cfg: ExperimentConfig, **kwargs):
        super().__init__(dataset, model, cfg, **kwargs)
        self.clients = {s.client_id: FedClient(s, model, cfg.train, cfg.optimizer, cfg.seed) for s in dataset.clients}
        self.stoppers = {c: EarlyStopping(cfg.local.patience) for c in self.clients}
        self.latest: Dict[int, Metrics] = {}

    def trained_clients(self) -> List[FedClient]:
        return [self.clients[c] for c in sorted(self.clients)]

    def active(self) -> List[int]:
        return [c for c in sorted(self.clients) if not self.stoppers[c].should_stop]

    def _train_block(self, epochs: int) -> None:
        def work(c: int) -> None:
            self.clients[c].train_epochs(epochs, self.cfg.rounds.batch_size)

        if self.executor is not None:
            list(self.executor.map(work, self.active()))
        else:
            for c in self.active():
                work(c)

    def _evaluate_point(self) -> EvalRecord:
        per_client = {}
        for c in self.active():
            client = self.clients[c]
            metrics = client.evaluate("valid", self.cfg.directions)
            per_client[c] = self.latest[c] = metrics
            if self.stoppers[c].update(metrics.mrr, self.epoch):
                self.best.store(c, self.epoch, metrics, client.entity_matrix, client.relation_matrix)
            elif self.stoppers[c].should_stop:
                logger.warning(f"Клиент {c}: ранняя остановка на эпохе {self.epoch}")

        self.stopped = not self.active()
        average = weighted_average([self.latest[c] for c in sorted(self.latest)])
        return EvalRecord(self.epoch, per_client, average)

    def _progress_state(self) -> Dict[str, object]:
        return {
            "stoppers": {str(c): s.state_dict() for c, s in self.stoppers.items()},
            "latest": {str(c): m.as_dict() for c, m in self.latest.items()},
        }

    def _load_progress_state(self, state: Mapping[str, object]) -> None:
        for key, value in state["stoppers"].items():
            self.stoppers[int(key)].load_state_dict(value)
        self.latest = {int(c): Metrics(**m) for c, m in state["latest"].items()}


class EntireTrainer(_EpochTrainer):
    """
    Одна модель на объединённых данных клиентов, оценка по клиентам.

    Если у клиентов нет общих сущностей, строки модели распадаются на
    непересекающиеся блоки клиентов. Тогда каждый блок инициализируется
    потоком своего клиента, батчи не смешивают клиентов, а негативы
    выбираются среди сущностей того же клиента его генератором: обучение
    совпадает с single бит в бит.
    """

    setting = "entire"

    def __init__(self, dataset: FederatedDataset, model: BaseKGEModel, cfg: ExperimentConfig, **kwargs):
        super().__init__(dataset, model, cfg, **kwargs)
        self.pooled = pool_shards(dataset)
        self.client = FedClient(self.pooled.shard, model, cfg.train, cfg.optimizer, cfg.seed, init_scope=0)
        self.filters = {s.client_id: FilterIndex.from_shard(s) for s in dataset.clients}
        self.stopper = EarlyStopping(cfg.local.patience)

        self.by_client = sum(s.num_entities for s in dataset.clients) == self.pooled.shard.num_entities
        self.streams: Dict[int, np.random.Generator] = {}
        if self.by_client:
            self._init_by_client()

    def _init_by_client(self) -> None:
        dim = self.cfg.train.dim
        for shard in self.dataset.clients:
            c = shard.client_id
            self.client.entity_matrix[self.pooled.entity_rows[c]] = self.model.init_entities(
                shard.num_entities, dim, make_rng(self.cfg.seed, ENTITY_STREAM, c))
            self.client.relation_matrix[self.pooled.relation_rows[c]] = self.model.init_relations(
                shard.num_relations, dim, make_rng(self.cfg.seed, RELATION_STREAM, c))
            self.streams[c] = make_rng(self.cfg.seed, TRAIN_STREAM, c)
        logger.info("Клиенты не имеют общих сущностей: батчи и негативы формируются по клиентам")

    def _train_client_block(self, shard: ClientShard, epochs: int) -> None:
        """Эпохи на train одного клиента в строках общей модели."""
        train = shard.train.array
        if len(train) == 0:
            if epochs > 0:
                logger.warning(f"Клиент {shard.client_id}: пустой train, обучение пропущено")
            return

        hyper, batch_size = self.cfg.train, self.cfg.rounds.batch_size
        ent, rel = self.pooled.entity_rows[shard.client_id], self.pooled.relation_rows[shard.client_id]
        known = shard.train if hyper.strict_negatives else None
        rng = self.streams[shard.client_id]
        for _ in range(epochs):
            order = rng.permutation(len(train))
            for s in range(0, len(order), batch_size):
                local = train[order[s:s + batch_size]]
                negatives = sample_negative_batch(local, shard.num_entities, hyper.n_neg, rng, hyper.corruption, known)
                positives = np.stack([ent[local[:, 0]], rel[local[:, 1]], ent[local[:, 2]]], axis=1)
                self.client.train_batch(positives, NegativeBatch(ent[negatives.entities], negatives.tail_side))

    def trained_clients(self) -> List[FedClient]:
        return [self.client]

    def client_parameters(self, client_id: int) -> Tuple[np.ndarray, np.ndarray]:
        """Строки общей модели в локальном порядке клиента."""
        return (self.client.entity_matrix[self.pooled.entity_rows[client_id]],
                self.client.relation_matrix[self.pooled.relation_rows[client_id]])

    def scorer(self, client_id: int) -> KGEScorer:
        return KGEScorer.remapped(self.model, self.client.entity_matrix, self.client.relation_matrix,
                                  self.pooled.entity_rows[client_id], self.pooled.relation_rows[client_id])

    def _train_block(self, epochs: int) -> None:
        if not self.by_client:
            self.client.train_epochs(epochs, self.cfg.rounds.batch_size)
            return
        for shard in self.dataset.clients:
            self._train_client_block(shard, epochs)

    def _evaluate_point(self) -> EvalRecord:
        per_client = {}
        for shard in self.dataset.clients:
            c = shard.client_id
            per_client[c] = evaluate(self.scorer(c), shard.valid, self.filters[c], self.cfg.directions)
        average = weighted_average([per_client[c] for c in sorted(per_client)])

        if self.stopper.update(average.mrr, self.epoch):
            for c, metrics in per_client.items():
                self.best.store(c, self.epoch, metrics, *self.client_parameters(c))
        if self.stopper.should_stop:
            self.stopped = True
            logger.warning(f"Ранняя остановка на эпохе {self.epoch}")
        return EvalRecord(self.epoch, per_client, average)

    def _progress_state(self) -> Dict[str, object]:
        return {"stopper": self.stopper.state_dict(),
                "streams": {str(c): rng_state(rng) for c, rng in self.streams.items()}}

    def _load_progress_state(self, state: Mapping[str, object]) -> None:
        self.stopper.load_state_dict(state["stopper"])
        for key, value in state.get("streams", {}).items():
            restore_rng(self.streams[int(key)], value)


Trainer = Union[SingleTrainer, EntireTrainer, FedTrainer]


def build_fed_trainer(dataset: FederatedDataset, model: BaseKGEModel, cfg: ExperimentConfig,
                      **kwargs) -> FedTrainer:
    clients = {s.client_id: FedClient(s, model, cfg.train, cfg.optimizer, cfg.seed) for s in dataset.clients}
    server = FedServer(model, cfg.train.dim, cfg.seed)
    server.register([RegisterMessage.from_bytes(clients[c].register().to_bytes()) for c in sorted(clients)])
    return FedTrainer(server, clients, cfg.rounds, cfg.directions, **kwargs)


def build_trainer(dataset: FederatedDataset, cfg: ExperimentConfig, executor: Optional[Executor] = None,
                  metrics_log: Optional[MetricsLog] = None, on_evaluation: Optional[Callable] = None,
                  progress: bool = False) -> Trainer:
    """Создаёт тренер нужной постановки."""
    model = build_model(cfg)
    kwargs = dict(executor=executor, metrics_log=metrics_log, on_evaluation=on_evaluation, progress=progress)
    if cfg.setting == "single":
        return SingleTrainer(dataset, model, cfg, **kwargs)
    if cfg.setting == "entire":
        return EntireTrainer(dataset, model, cfg, **kwargs)
    return build_fed_trainer(dataset, model, cfg, **kwargs)


def _vocab_sections(dataset: FederatedDataset) -> Dict[str, object]:
    return {
        f"client_{s.client_id}/vocab": {"entities": list(s.vocab.entities), "relations": list(s.vocab.relations)}
        for s in dataset.clients
    }


def snapshot_sections(cfg: ExperimentConfig, dataset: FederatedDataset, snapshot: Snapshot) -> Dict[str, object]:
    """Секции чекпоинта лучших параметров: по матрице сущностей и отношений на клиента."""
    sections: Dict[str, object] = {
        "config": cfg.snapshot(),
        "meta": {"setting": cfg.setting, "model": cfg.model.value, "clients": [s.client_id for s in dataset.clients]},
    }
    sections.update(_vocab_sections(dataset))
    sections.update(snapshot.state_dict("scorer"))
    return sections


def trainer_sections(cfg: ExperimentConfig, dataset: FederatedDataset, trainer: Trainer) -> Dict[str, object]:
    sections: Dict[str, object] = {
        "config": cfg.snapshot(),
        "meta": {"setting": cfg.setting, "model": cfg.model.value, "clients": [s.client_id for s in dataset.clients]},
    }
    sections.update(_vocab_sections(dataset))
    sections.update(trainer.state_dict())
    return sections


def _check_vocabulary(sections: Mapping[str, object], dataset: FederatedDataset) -> None:
    for shard in dataset.clients:
        key = f"client_{shard.client_id}/vocab"
        if key not in sections:
            raise CheckpointError(f"В чекпоинте нет клиента {shard.client_id}")
        vocab = sections[key]
        if vocab["entities"] != shard.vocab.entities or vocab["relations"] != shard.vocab.relations:
            raise CheckpointError(f"Словарь клиента {shard.client_id} в чекпоинте не совпадает с данными")


def load_scorers(sections: Mapping[str, object], dataset: FederatedDataset,
                 prefix: str = "scorer") -> Tuple[BaseKGEModel, Dict[int, KGEScorer]]:
    """Оценщики клиентов из чекпоинта лучших параметров."""
    if "config" not in sections or f"{prefix}/meta" not in sections:
        raise CheckpointError(f"В чекпоинте нет секции {prefix}: ожидался {BEST_CHECKPOINT}")
    _check_vocabulary(sections, dataset)
    cfg = ExperimentConfig.parse_obj({k: v for k, v in sections["config"].items()
                                      if k in ExperimentConfig.__fields__})
    model = build_model(cfg)
    snapshot = Snapshot.from_state_dict(sections, prefix)
    missing = sorted({s.client_id for s in dataset.clients} - set(snapshot.entities))
    if missing:
        raise CheckpointError(f"В чекпоинте нет параметров клиентов {missing}")
    scorers = {c: KGEScorer(model, snapshot.entities[c], snapshot.relations[c]) for c in snapshot.entities}
    return model, scorers


def evaluate_scorers(scorers: Mapping[int, object], dataset: FederatedDataset, split: str,
                     directions: str) -> EvalRecord:
    per_client = {}
    for shard in dataset.clients:
        if len(shard.split(split)) == 0:
            raise ConfigurationError(f"Клиент {shard.client_id}: часть {split} пуста")
        per_client[shard.client_id] = evaluate(scorers[shard.client_id], shard.split(split),
                                               FilterIndex.from_shard(shard), directions)
    return EvalRecord(0, per_client, weighted_average([per_client[c] for c in sorted(per_client)]))


def evaluate_checkpoint(path: Union[str, Path], dataset: FederatedDataset, split: str = "test",
                        directions: str = "both") -> EvalRecord:
    """Метрики лучших параметров из чекпоинта на заданной части разбиения."""
    _, scorers = load_scorers(load_checkpoint(path), dataset)
    return evaluate_scorers(scorers, dataset, split, directions)


@dataclass
class ExperimentResult:
    result: TrainResult
    test: EvalRecord
    trainer: Trainer
    output_dir: Optional[Path] = None


def run_experiment(cfg: ExperimentConfig, dataset: FederatedDataset, output_dir: Union[str, Path, None] = None,
                   resume: Union[str, Path, None] = None, progress: bool = False) -> ExperimentResult:
    """
    Обучение в постановке cfg.setting, оценка лучшего снимка на test.

    Args:
        cfg: Конфигурация эксперимента
        dataset: Федеративное разбиение
        output_dir: Куда писать metrics.tsv, best.ckpt и last.ckpt (None - никуда)
        resume: Чекпоинт last.ckpt для продолжения обучения
        progress: Показывать прогресс-бар

    Returns:
        ExperimentResult
    """
    output_dir = Path(output_dir) if output_dir is not None else None
    metrics_log = None
    if output_dir is not None:
        output_dir.mkdir(parents=True, exist_ok=True)
        metrics_log = MetricsLog(output_dir / METRICS_LOG_NAME, append=resume is not None)

    def on_evaluation(trainer: Trainer) -> None:
        if output_dir is not None:
            save_checkpoint(output_dir / LAST_CHECKPOINT, trainer_sections(cfg, dataset, trainer))
            if trainer.best.entities:
                save_checkpoint(output_dir / BEST_CHECKPOINT, snapshot_sections(cfg, dataset, trainer.best))

    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        trainer = build_trainer(dataset, cfg, executor, metrics_log, on_evaluation, progress)
        if resume is not None:
            sections = load_checkpoint(resume)
            _check_vocabulary(sections, dataset)
            if sections["meta"]["setting"] != cfg.setting:
                raise CheckpointError(f"Чекпоинт постановки {sections['meta']['setting']}, а запуск {cfg.setting}")
            trainer.load_state_dict(sections)
            if metrics_log is not None:
                metrics_log.truncate_after(trainer.position)
            logger.info(f"Продолжение с позиции {trainer.position}")

        result = trainer.run()
    finally:
        if executor is not None:
            executor.shutdown()

    if not result.best.entities:
        raise ConfigurationError("Не было ни одной оценки: увеличьте max_rounds / max_epochs")

    model = trainer.model
    scorers = {c: KGEScorer(model, result.best.entities[c], result.best.relations[c]) for c in result.best.entities}
    test = evaluate_scorers(scorers, dataset, "test", cfg.directions)
    test.round = trainer.position
    if metrics_log is not None:
        metrics_log.write_evaluation(test.round, "test", test.per_client, test.average)
    if output_dir is not None:
        save_checkpoint(output_dir / BEST_CHECKPOINT, snapshot_sections(cfg, dataset, result.best))
        save_checkpoint(output_dir / LAST_CHECKPOINT, trainer_sections(cfg, dataset, trainer))

    logger.info(f"{cfg.setting}: test MRR={test.average.mrr:.4f}")
    return ExperimentResult(result, test, trainer, output_dir)


@dataclass
class FusionReport:
    """Метрики клиентов до и после слияния: variant -> split -> EvalRecord"""
    records: Dict[str, Dict[str, EvalRecord]] = field(default_factory=dict)
    models: Dict[int, FusionModel] = field(default_factory=dict)


def run_fusion(seed: int, fusion_cfg: FusionConfig, dataset: FederatedDataset,
               single_sections: Mapping[str, object], fed_sections: Mapping[str, object],
               directions: str = "both", splits: Tuple[str, ...] = ("valid", "test")) -> FusionReport:
    """
    Обучает слияние для каждого клиента и оценивает single, fed и fused.
    """
    _, single = load_scorers(single_sections, dataset)
    _, fed = load_scorers(fed_sections, dataset)

    report = FusionReport()
    for shard in dataset.clients:
        c = shard.client_id
        fusion = FusionModel(single[c], fed[c])
        train_fusion(fusion, shard.split(fusion_cfg.train_split), fusion_cfg, make_rng(seed, FUSION_STREAM, c))
        if fusion_cfg.keep_best:
            select_weights(fusion, shard.split(fusion_cfg.train_split), FilterIndex.from_shard(shard), directions)
        report.models[c] = fusion

    variants = {"single": single, "fed": fed, "fused": report.models}
    for variant, scorers in variants.items():
        report.records[variant] = {split: evaluate_scorers(scorers, dataset, split, directions) for split in splits}
    return report


def fusion_sections(config: Mapping[str, object], dataset: FederatedDataset, report: FusionReport) -> Dict[str, object]:
    sections: Dict[str, object] = {"config": dict(config), "meta": {"setting": "fused",
                                                                     "clients": [s.client_id for s in dataset.clients]}}
    sections.update(_vocab_sections(dataset))
    for c, fusion in report.models.items():
        sections[f"client_{c}/fusion"] = {"weight": [float(w) for w in fusion.weight], "bias": float(fusion.bias)}
        sections[f"client_{c}/single/entities"] = fusion.single.entity_matrix
        sections[f"client_{c}/single/relations"] = fusion.single.relation_matrix
        sections[f"client_{c}/fed/entities"] = fusion.fed.entity_matrix
        sections[f"client_{c}/fed/relations"] = fusion.fed.relation_matrix
    return sections
