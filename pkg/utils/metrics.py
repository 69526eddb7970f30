"""
Модуль для расчёта метрик качества предсказания связей.

Основные принципы:
- Фильтрованная постановка: кандидаты, образующие другие известные триплеты
  (train ∪ valid ∪ test клиента), исключаются, истинная сущность остаётся
- Кандидаты - локальные сущности клиента
- Равные оценки: средний ранг, округлённый вверх
- Только MRR и Hits@1/5/10 (без mean rank)
"""

import math
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from utils.errors import ContractViolation
from utils.kg_data import TripleStore

HITS_AT = (1, 5, 10)
DIRECTIONS = ("tail", "head", "both")

# Сколько запросов оценивается за один вызов оценщика
QUERY_BATCH = 256


@dataclass(frozen=True)
class Metrics:
    """Метрики ранжирования по набору запросов"""
    mrr: float
    hits1: float
    hits5: float
    hits10: float
    count: int

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


class FilterIndex:
    """Известные триплеты клиента: (h, r) -> хвосты и (t, r) -> головы."""

    def __init__(self, *stores: TripleStore):
        self.tails_of: Dict[Tuple[int, int], Set[int]] = {}
        self.heads_of: Dict[Tuple[int, int], Set[int]] = {}
        for store in stores:
            for (h, r), tails in store.tails_of.items():
                self.tails_of.setdefault((h, r), set()).update(tails)
            for (t, r), heads in store.heads_of.items():
                self.heads_of.setdefault((t, r), set()).update(heads)

    @classmethod
    def from_shard(cls, shard) -> "FilterIndex":
        return cls(shard.train, shard.valid, shard.test)

    def known(self, anchor: int, relation: int, side: str) -> Set[int]:
        """Известные ответы на запрос: хвосты для 'tail', головы для 'head'."""
        pool = self.tails_of if side == "tail" else self.heads_of
        return pool.get((anchor, relation), set())


def _rank_row(scores: np.ndarray, truth: int, filtered: Iterable[int]) -> int:
    keep = np.ones(len(scores), dtype=bool)
    keep[list(filtered)] = False
    keep[truth] = True
    target = scores[truth]
    higher = int(np.count_nonzero(keep & (scores > target)))
    equal = int(np.count_nonzero(keep & (scores == target))) - 1
    return 1 + higher + math.ceil(equal / 2)


def rank(scorer, query: Tuple[int, int, str], truth: int, filter_index: Optional[FilterIndex] = None) -> int:
    """
    Фильтрованный ранг истинной сущности.

    Args:
        scorer: Оценщик с методом score_queries
        query: (известная сущность, отношение, сторона 'tail' | 'head')
        truth: Истинная сущность
        filter_index: Известные триплеты (None - без фильтрации)

    Returns:
        Ранг (целое >= 1)
    """
    anchor, relation, side = query
    scores = scorer.score_queries(np.array([anchor]), np.array([relation]), side)[0]
    if not 0 <= truth < len(scores):
        raise ContractViolation(f"Истинная сущность {truth} не входит в кандидатов")
    filtered = filter_index.known(anchor, relation, side) if filter_index is not None else ()
    return _rank_row(scores, truth, filtered)


def metrics_from_ranks(ranks: Sequence[int]) -> Metrics:
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        raise ContractViolation("Нет запросов для расчёта метрик")
    return Metrics(
        mrr=float(np.mean(1.0 / ranks)),
        hits1=float(np.mean(ranks <= 1)),
        hits5=float(np.mean(ranks <= 5)),
        hits10=float(np.mean(ranks <= 10)),
        count=len(ranks),
    )


def _sides(directions: str) -> List[str]:
    if directions not in DIRECTIONS:
        raise ContractViolation(f"Неизвестный режим направлений: {directions}")
    return ["tail", "head"] if directions == "both" else [directions]


def compute_ranks(scorer, split: TripleStore, filter_index: Optional[FilterIndex],
                  directions: str = "both") -> np.ndarray:
    """Ранги всех запросов: сначала хвостовые, затем головные."""
    ranks: List[int] = []
    triples = split.array
    for side in _sides(directions):
        anchor_col, truth_col = (0, 2) if side == "tail" else (2, 0)
        for start in range(0, len(triples), QUERY_BATCH):
            batch = triples[start:start + QUERY_BATCH]
            scores = scorer.score_queries(batch[:, anchor_col], batch[:, 1], side)
            for row, (anchor, relation, truth) in zip(scores, batch[:, [anchor_col, 1, truth_col]].tolist()):
                filtered = filter_index.known(anchor, relation, side) if filter_index is not None else ()
                ranks.append(_rank_row(row, truth, filtered))
    return np.asarray(ranks, dtype=np.int64)


def evaluate(scorer, split: TripleStore, filter_index: Optional[FilterIndex] = None,
             directions: str = "both") -> Metrics:
    """
    Метрики предсказания связей на части разбиения.

    Args:
        scorer: Оценщик с методом score_queries
        split: Оцениваемые триплеты (не пустые)
        filter_index: Известные триплеты клиента
        directions: 'tail', 'head' или 'both'

    Returns:
        Metrics
    """
    if len(split) == 0:
        raise ContractViolation("Пустая часть разбиения для оценки")
    return metrics_from_ranks(compute_ranks(scorer, split, filter_index, directions))


def weighted_average(metrics: Sequence[Metrics], weights: Optional[Sequence[float]] = None) -> Metrics:
    """
    Среднее метрик клиентов с весами, по умолчанию пропорциональными числу запросов.
    """
    if not metrics:
        raise ContractViolation("Нет метрик для усреднения")
    w = np.asarray([m.count for m in metrics] if weights is None else weights, dtype=np.float64)
    if (w <= 0).any():
        raise ContractViolation("Веса усреднения должны быть > 0")
    w = w / w.sum()

    def avg(name: str) -> float:
        return float(np.dot(w, [getattr(m, name) for m in metrics]))

    return Metrics(avg("mrr"), avg("hits1"), avg("hits5"), avg("hits10"), sum(m.count for m in metrics))


def expected_random_mrr(candidate_counts: Sequence[int]) -> Tuple[float, float]:
    """
    Ожидание MRR и его стандартная ошибка для случайного оценщика,
    когда ранг равномерен на 1..n_q для каждого запроса.
    """
    means, variances = [], []
    for n in candidate_counts:
        k = np.arange(1, n + 1, dtype=np.float64)
        first = float(np.sum(1.0 / k) / n)
        second = float(np.sum(1.0 / k ** 2) / n)
        means.append(first)
        variances.append(second - first ** 2)
    q = len(means)
    return float(np.mean(means)), float(np.sqrt(np.sum(variances)) / q)


def rounds_to_threshold(history: Sequence[Tuple[int, Metrics]], threshold: float = 0.5,
                        metric: str = "hits10") -> Optional[int]:
    """Первый раунд, на котором метрика достигла порога (None, если не достигла)."""
    for round_number, m in history:
        if getattr(m, metric) >= threshold:
            return round_number
    return None
