"""
Синтетический граф знаний со скрытой трансляционной структурой.

Сущности - точки в R^k, отношения - сдвиги; хвост триплета (h, r, ?) -
ближайшая к h + r сущность, отличная от h. Такой граф обучаем для
TransE-подобных моделей и детерминирован при заданном seed.
"""

import logging
from typing import Tuple

import numpy as np

from utils.errors import ConfigurationError
from utils.kg_data import TripleStore, Vocabulary
from utils.split_dataset import DEFAULT_RATIOS, FederatedDataset, federate_split

logger = logging.getLogger(__name__)


def generate_synthetic_kg(num_entities: int = 200, num_relations: int = 12, num_triples: int = 2000,
                          latent_dim: int = 4, seed: int = 0) -> Tuple[TripleStore, Vocabulary]:
    """
    Args:
        num_entities: Число сущностей
        num_relations: Число отношений
        num_triples: Число триплетов (не больше num_entities × num_relations)
        latent_dim: Размерность скрытого пространства
        seed: Зерно генератора

    Returns:
        (TripleStore, Vocabulary) с метками e0.. и r0..
    """
    if num_entities < 2 or num_relations < 1:
        raise ConfigurationError("Нужно не меньше двух сущностей и одного отношения")
    if num_triples > num_entities * num_relations:
        raise ConfigurationError(
            f"Триплетов {num_triples} больше, чем пар (голова, отношение): {num_entities * num_relations}")

    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(num_entities, latent_dim))
    shifts = rng.normal(0.0, 0.3, size=(num_relations, latent_dim))

    pairs = rng.choice(num_entities * num_relations, size=num_triples, replace=False)
    heads, relations = pairs // num_relations, pairs % num_relations

    targets = points[heads] + shifts[relations]
    distances = np.linalg.norm(targets[:, None, :] - points[None, :, :], axis=-1)
    distances[np.arange(num_triples), heads] = np.inf
    tails = distances.argmin(axis=1)

    vocab = Vocabulary([f"e{i}" for i in range(num_entities)], [f"r{j}" for j in range(num_relations)])
    store = TripleStore(np.stack([heads, relations, tails], axis=1), source="synthetic")
    logger.info(f"Синтетический граф: {num_entities} сущностей, {num_relations} отношений, {len(store)} триплетов")
    return store, vocab


def synthetic_federated_dataset(num_clients: int = 3, num_entities: int = 200, num_relations: int = 12,
                                num_triples: int = 2000, seed: int = 0) -> FederatedDataset:
    """Синтетический граф, сразу разбитый на клиентов."""
    store, vocab = generate_synthetic_kg(num_entities, num_relations, num_triples, seed=seed)
    return federate_split(store, vocab, num_clients, DEFAULT_RATIOS, seed)
