"""
Утилиты для проверки и описания федеративных разбиений.
"""

from typing import List, Optional
import logging

import numpy as np

from utils.split_dataset import FederatedDataset, SplitStats, shard_stats

logger = logging.getLogger(__name__)


class DatasetValidator:
    """Проверка инвариантов федеративного разбиения"""

    @staticmethod
    def validate_partition(dataset: FederatedDataset) -> bool:
        """Наборы отношений клиентов попарно не пересекаются"""
        seen = set()
        for shard in dataset.clients:
            labels = set(shard.vocab.relations)
            overlap = seen & labels
            if overlap:
                logger.warning(f"Клиент {shard.client_id}: отношения встречаются у других клиентов: {sorted(overlap)[:5]}")
                return False
            seen |= labels

        if seen != set(dataset.vocabulary.relations):
            logger.warning("Объединение отношений клиентов не совпадает с общим словарём")
            return False
        return True

    @staticmethod
    def validate_conservation(dataset: FederatedDataset, source_count: int) -> bool:
        """Сумма триплетов клиентов равна числу исходных триплетов"""
        total = sum(s.num_triples for s in dataset.clients)
        if total != source_count:
            logger.warning(f"Потеряны триплеты: {total} != {source_count}")
            return False
        return True

    @staticmethod
    def validate_leakage(dataset: FederatedDataset) -> bool:
        """train, valid и test каждого клиента попарно не пересекаются"""
        for shard in dataset.clients:
            parts = [set(map(tuple, shard.split(name).array.tolist())) for name in ("train", "valid", "test")]
            if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
                logger.warning(f"Клиент {shard.client_id}: утечка триплетов между частями разбиения")
                return False
        return True

    @staticmethod
    def validate_vocabulary(dataset: FederatedDataset) -> bool:
        """Каждая сущность клиента присутствует в общем словаре"""
        for shard in dataset.clients:
            missing = [e for e in shard.vocab.entities if e not in dataset.vocabulary.entity_index]
            if missing:
                logger.warning(f"Клиент {shard.client_id}: {len(missing)} сущностей нет в общем словаре")
                return False
        return True

    @classmethod
    def validate(cls, dataset: FederatedDataset, source_count: Optional[int] = None) -> bool:
        checks = [cls.validate_partition(dataset), cls.validate_leakage(dataset), cls.validate_vocabulary(dataset)]
        if source_count is not None:
            checks.append(cls.validate_conservation(dataset, source_count))
        return all(checks)


def entity_overlap(dataset: FederatedDataset) -> np.ndarray:
    """
    Матрица долей общих сущностей между клиентами:
    overlap[i, j] = |E_i ∩ E_j| / min(|E_i|, |E_j|).
    """
    sets = [set(s.vocab.entities) for s in dataset.clients]
    n = len(sets)
    overlap = np.ones((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                denominator = min(len(sets[i]), len(sets[j])) or 1
                overlap[i, j] = len(sets[i] & sets[j]) / denominator
    return overlap


def generate_report(stats: SplitStats, title: str = "Federated split") -> str:
    """Генерирует текстовый отчет в формате таблицы статистики датасетов"""
    lines: List[str] = [
        f"=== {title} ===",
        f"{'client':<8} {'#Rel':>8} {'#Ent':>10} {'#Tri':>10}",
    ]
    for s in stats.per_client:
        lines.append(f"{s.client_id:<8} {s.num_relations:>8} {s.num_entities:>10} {s.num_triples:>10}")
    lines.append(f"{'avg':<8} {stats.avg_relations:>8.1f} {stats.avg_entities:>10.1f} {stats.avg_triples:>10.1f}")
    return "\n".join(lines) + "\n"


def save_stats_report(dataset: FederatedDataset, output_path: str) -> str:
    """Сохраняет отчет по статистике разбиения в файл"""
    report = generate_report(shard_stats(dataset), title=f"Federated split, C={dataset.num_clients}")

    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(report)

    return report


def mean_pairwise_overlap(dataset: FederatedDataset) -> float:
    """Средняя доля общих сущностей по парам различных клиентов"""
    overlap = entity_overlap(dataset)
    if len(overlap) < 2:
        return 1.0
    return float(overlap[~np.eye(len(overlap), dtype=bool)].mean())
