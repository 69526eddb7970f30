"""
Объединение данных клиентов в один граф (постановка Entire).

Сущности нумеруются по общему словарю разбиения (порядок клиентов, затем
локальный порядок), отношения клиентов не пересекаются, поэтому метки
остаются уникальными.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from utils.kg_data import TripleStore, Vocabulary
from utils.split_dataset import ClientShard, FederatedDataset

logger = logging.getLogger(__name__)


@dataclass
class PooledDataset:
    """Объединённые данные и отображения локальных индексов клиентов в общие"""
    shard: ClientShard
    entity_rows: Dict[int, np.ndarray]
    relation_rows: Dict[int, np.ndarray]


def label_rows(local: Vocabulary, pooled: Vocabulary) -> Tuple[np.ndarray, np.ndarray]:
    """Строки общего словаря для локальных сущностей и отношений клиента."""
    entity_rows = np.array([pooled.entity_id(e) for e in local.entities], dtype=np.int64)
    relation_rows = np.array([pooled.relation_id(r) for r in local.relations], dtype=np.int64)
    return entity_rows, relation_rows


def pool_shards(dataset: FederatedDataset, client_id: int = 0) -> PooledDataset:
    """
    Объединяет train/valid/test всех клиентов в общем словаре.

    Args:
        dataset: Федеративное разбиение
        client_id: Идентификатор, под которым объединённые данные обучаются

    Returns:
        PooledDataset
    """
    vocab = Vocabulary(dataset.vocabulary.entities, dataset.vocabulary.relations)
    entity_rows, relation_rows = {}, {}
    parts = {"train": [], "valid": [], "test": []}

    for shard in dataset.clients:
        ent, rel = label_rows(shard.vocab, vocab)
        entity_rows[shard.client_id] = ent
        relation_rows[shard.client_id] = rel
        for name, collected in parts.items():
            local = shard.split(name).array
            if len(local):
                collected.append(np.stack([ent[local[:, 0]], rel[local[:, 1]], ent[local[:, 2]]], axis=1))

    stores = [TripleStore(np.concatenate(p) if p else None, source=f"pooled/{name}") for name, p in parts.items()]
    pooled = ClientShard(client_id, vocab.freeze(), *stores)
    logger.info(f"Объединено {dataset.num_clients} клиентов: {pooled.num_entities} сущностей, "
                f"{pooled.num_relations} отношений, {len(pooled.train)} обучающих триплетов")
    return PooledDataset(pooled, entity_rows, relation_rows)
