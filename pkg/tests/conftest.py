#!/usr/bin/env python3
"""
Общие фикстуры тестов.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Добавляем корневую папку проекта в путь
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from utils.kg_data import TripleStore, Vocabulary
from utils.split_dataset import ClientShard, FederatedDataset, union_vocabulary
from utils.synthetic_kg import synthetic_federated_dataset


def make_shard(client_id, entities, relations, train, valid=(), test=()):
    """Клиент из меток и триплетов в локальных индексах."""
    vocab = Vocabulary(entities, relations)
    return ClientShard(client_id, vocab, TripleStore(train), TripleStore(valid), TripleStore(test))


def make_dataset(shards):
    return FederatedDataset(list(shards), union_vocabulary(s.vocab for s in shards), seed=0)


@pytest.fixture
def small_dataset():
    """Синтетический граф на 2 клиентах, достаточно маленький для быстрых тестов."""
    return synthetic_federated_dataset(num_clients=2, num_entities=40, num_relations=6, num_triples=160, seed=0)


@pytest.fixture
def single_client_dataset():
    return synthetic_federated_dataset(num_clients=1, num_entities=30, num_relations=3, num_triples=80, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def disjoint_dataset(small_dataset):
    """Те же триплеты, но метки сущностей у клиентов не пересекаются."""
    shards = [
        make_shard(s.client_id, [f"{s.client_id}/{e}" for e in s.vocab.entities], list(s.vocab.relations),
                   s.train.array, s.valid.array, s.test.array)
        for s in small_dataset.clients
    ]
    return make_dataset(shards)
