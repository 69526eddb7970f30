"""
Разбиение графа знаний на федеративные клиенты.

Отношения случайно и равномерно распределяются по клиентам, каждый клиент
получает все триплеты своих отношений, затем триплеты клиента перемешиваются
и делятся на train/valid/test.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ConfigurationError, KGParseError
from utils.kg_data import TripleStore, Vocabulary, load_triples, save_triples

logger = logging.getLogger(__name__)

MANIFEST_HEADER = "# fede-split-manifest v1"
MANIFEST_NAME = "manifest.tsv"
DEFAULT_RATIOS = (0.8, 0.1, 0.1)


@dataclass
class ClientShard:
    """Данные одного клиента в локальных индексах."""
    client_id: int
    vocab: Vocabulary
    train: TripleStore
    valid: TripleStore
    test: TripleStore

    @property
    def num_entities(self) -> int:
        return self.vocab.num_entities

    @property
    def num_relations(self) -> int:
        return self.vocab.num_relations

    @property
    def num_triples(self) -> int:
        return len(self.train) + len(self.valid) + len(self.test)

    def split(self, name: str) -> TripleStore:
        if name not in ("train", "valid", "test"):
            raise ConfigurationError(f"Неизвестная часть разбиения: {name}")
        return getattr(self, name)

    def all_triples(self) -> TripleStore:
        return TripleStore.union(self.train, self.valid, self.test)


@dataclass
class FederatedDataset:
    """Набор клиентов и общий словарь (объединение словарей клиентов)."""
    clients: List[ClientShard]
    vocabulary: Vocabulary
    seed: Optional[int] = None

    @property
    def num_clients(self) -> int:
        return len(self.clients)


@dataclass
class ShardStats:
    """Статистика одного клиента"""
    client_id: int
    num_relations: int
    num_entities: int
    num_triples: int


@dataclass
class SplitStats:
    """Статистика разбиения: по клиентам и средние значения"""
    per_client: List[ShardStats] = field(default_factory=list)
    avg_relations: float = 0.0
    avg_entities: float = 0.0
    avg_triples: float = 0.0


def union_vocabulary(vocabs: Iterable[Vocabulary]) -> Vocabulary:
    """Объединяет словари в порядке первого появления (клиент, затем локальный порядок)."""
    merged = Vocabulary()
    for vocab in vocabs:
        for label in vocab.entities:
            merged.add_entity(label)
        for label in vocab.relations:
            merged.add_relation(label)
    return merged


def _validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"Доли train/valid/test должны быть тремя неотрицательными числами с суммой 1: {ratios}")
    return float(ratios[0]), float(ratios[1]), float(ratios[2])


def _build_shard(client_id: int, parts: Sequence[np.ndarray], source: Vocabulary) -> ClientShard:
    """Перекодирует глобальные триплеты клиента в локальный словарь."""
    vocab = Vocabulary()
    local_parts = []
    for part in parts:
        rows = []
        for h, r, t in part.tolist():
            rows.append((vocab.add_entity(source.entities[h]),
                         vocab.add_relation(source.relations[r]),
                         vocab.add_entity(source.entities[t])))
        local_parts.append(TripleStore(rows, source=f"client_{client_id}"))
    return ClientShard(client_id, vocab, *local_parts)


def federate_split(store: TripleStore, vocab: Vocabulary, num_clients: int,
                   ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0) -> FederatedDataset:
    """
    Распределяет отношения по клиентам и делит триплеты каждого клиента.

    Args:
        store: Исходные триплеты
        vocab: Словарь исходных триплетов
        num_clients: Количество клиентов C
        ratios: Доли train/valid/test внутри клиента
        seed: Зерно генератора; одинаковые входы дают одинаковый результат

    Returns:
        FederatedDataset
    """
    train_ratio, valid_ratio, test_ratio = _validate_ratios(ratios)
    if num_clients < 1:
        raise ConfigurationError(f"Количество клиентов должно быть >= 1, получено {num_clients}")
    if len(store) == 0:
        raise ConfigurationError("Нельзя разбить пустой набор триплетов")

    relation_ids = store.relation_ids()
    if num_clients > len(relation_ids):
        raise ConfigurationError(
            f"Клиентов ({num_clients}) больше, чем отношений ({len(relation_ids)})")

    rng = np.random.default_rng(seed)
    groups = np.array_split(rng.permutation(relation_ids), num_clients)

    shards = []
    for client_id, group in enumerate(groups):
        triples = store.array[np.isin(store.relations, group)]
        triples = triples[rng.permutation(len(triples))]

        n = len(triples)
        n_valid = int(np.floor(n * valid_ratio))
        n_test = int(np.floor(n * test_ratio))
        n_train = n - n_valid - n_test

        parts = (triples[:n_train], triples[n_train:n_train + n_valid], triples[n_train + n_valid:])
        shard = _build_shard(client_id, parts, vocab)
        shards.append(shard)
        logger.info(f"Клиент {client_id}: {len(group)} отношений, "
                    f"train/valid/test = {len(shard.train)}/{len(shard.valid)}/{len(shard.test)}")

    return FederatedDataset(shards, union_vocabulary(s.vocab for s in shards), seed)


def shard_stats(dataset: FederatedDataset) -> SplitStats:
    """Считает число отношений, сущностей и триплетов по клиентам и средние."""
    per_client = [
        ShardStats(s.client_id, s.num_relations, s.num_entities, s.num_triples)
        for s in dataset.clients
    ]
    count = len(per_client)
    if count == 0:
        return SplitStats()

    return SplitStats(
        per_client=per_client,
        avg_relations=sum(s.num_relations for s in per_client) / count,
        avg_entities=sum(s.num_entities for s in per_client) / count,
        avg_triples=sum(s.num_triples for s in per_client) / count,
    )


def write_federated_dataset(dataset: FederatedDataset, output_dir: Union[str, Path]) -> Path:
    """
    Сохраняет файлы клиентов и манифест.

    Манифест: строки-комментарии с '#', затем одна запись на клиента:
    client_id<TAB>train<TAB>valid<TAB>test<TAB>relation_1<TAB>...<TAB>relation_k
    Пути к файлам относительно папки манифеста.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    lines = [MANIFEST_HEADER, f"# seed={dataset.seed} clients={dataset.num_clients}"]
    for shard in dataset.clients:
        paths = []
        for name in ("train", "valid", "test"):
            relative = f"client_{shard.client_id}/{name}.txt"
            save_triples(shard.split(name), shard.vocab, output_dir / relative)
            paths.append(relative)
        lines.append("\t".join([str(shard.client_id), *paths, *shard.vocab.relations]))

    manifest_path = output_dir / MANIFEST_NAME
    with open(manifest_path, 'w', encoding='utf-8', newline='\n') as f:
        f.write("\n".join(lines) + "\n")

    logger.info(f"Манифест сохранён: {manifest_path}")
    return manifest_path


def load_federated_dataset(manifest_path: Union[str, Path]) -> FederatedDataset:
    """Загружает разбиение по манифесту; результат совпадает с исходным объектом."""
    manifest_path = Path(manifest_path)
    base_dir = manifest_path.parent
    seed: Optional[int] = None
    shards: List[ClientShard] = []

    with open(manifest_path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()

    if not lines or lines[0] != MANIFEST_HEADER:
        raise KGParseError(str(manifest_path), 1, "отсутствует заголовок манифеста")

    for line_number, line in enumerate(lines, 1):
        if not line:
            continue
        if line.startswith('#'):
            for token in line[1:].split():
                if token.startswith("seed=") and token[5:] != "None":
                    seed = int(token[5:])
            continue

        fields = line.split('\t')
        if len(fields) < 5:
            raise KGParseError(str(manifest_path), line_number, "запись клиента должна содержать id, три пути и отношения")

        client_id = int(fields[0])
        vocab = Vocabulary()
        stores = [load_triples(base_dir / relative, vocab)[0] for relative in fields[1:4]]
        if sorted(vocab.relations) != sorted(fields[4:]):
            raise KGParseError(str(manifest_path), line_number,
                               f"отношения клиента {client_id} не совпадают с файлами")
        shards.append(ClientShard(client_id, vocab, *stores))

    return FederatedDataset(shards, union_vocabulary(s.vocab for s in shards), seed)
