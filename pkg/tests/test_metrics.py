#!/usr/bin/env python3
"""
Тесты для модуля метрик (utils/metrics.py) и журнала метрик (utils/metrics_log.py).
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Добавляем корневую папку проекта в путь
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from kge_models.base import get_model
from kge_models.scorer import KGEScorer
from utils.errors import ContractViolation
from utils.kg_data import TripleStore
from utils.metrics import (FilterIndex, Metrics, compute_ranks, evaluate, expected_random_mrr, metrics_from_ranks,
                           rank, rounds_to_threshold, weighted_average)
from utils.metrics_log import FIELDS, MetricsLog, read_metrics_log


class TableScorer:
    """Оценщик с заранее заданной таблицей оценок хвостов: scores[h, r, t]."""

    def __init__(self, table: np.ndarray):
        self.table = table

    @property
    def num_entities(self) -> int:
        return self.table.shape[0]

    def score_queries(self, anchors, relations, side):
        if side == "tail":
            return self.table[anchors, relations, :]
        return self.table[:, relations, anchors].T


class RandomScorer:
    """Независимые случайные оценки на каждый запрос."""

    def __init__(self, num_entities: int, rng: np.random.Generator):
        self.num_entities = num_entities
        self.rng = rng

    def score_queries(self, anchors, relations, side):
        return self.rng.normal(size=(len(anchors), self.num_entities))


def brute_force_rank(table, h, r, t, side, known):
    """Ранг через сортировку всех оценок кандидатов."""
    if side == "tail":
        scores, truth, others = table[h, r, :], t, {x for (a, b, x) in known if a == h and b == r}
    else:
        scores, truth, others = table[:, r, t], h, {x for (x, b, c) in known if c == t and b == r}
    candidates = [e for e in range(len(scores)) if e == truth or e not in others]
    ordered = sorted(candidates, key=lambda e: -scores[e])
    higher = sum(1 for e in ordered if scores[e] > scores[truth])
    ties = sum(1 for e in ordered if scores[e] == scores[truth]) - 1
    return 1 + higher + (ties + 1) // 2


class TestRank:
    """Тесты фильтрованного ранга."""

    def test_truth_highest(self):
        table = np.zeros((4, 1, 4))
        table[0, 0, 2] = 5.0
        assert rank(TableScorer(table), (0, 0, "tail"), 2) == 1

    def test_all_ties(self):
        """10 равных оценок - средний ранг 5.5, округлённый вверх до 6."""
        table = np.zeros((10, 1, 10))
        assert rank(TableScorer(table), (0, 0, "tail"), 3) == 6

    def test_filter_removes_known(self):
        table = np.zeros((4, 1, 4))
        table[0, 0] = [0.0, 3.0, 2.0, 1.0]
        scorer = TableScorer(table)
        assert rank(scorer, (0, 0, "tail"), 2) == 2
        index = FilterIndex(TripleStore([(0, 0, 1), (0, 0, 2)]))
        assert rank(scorer, (0, 0, "tail"), 2, index) == 1

    def test_truth_kept_even_if_known(self):
        table = np.zeros((3, 1, 3))
        table[0, 0] = [1.0, 0.0, 2.0]
        index = FilterIndex(TripleStore([(0, 0, 0)]))
        assert rank(TableScorer(table), (0, 0, "tail"), 0, index) == 2

    def test_head_side(self):
        table = np.zeros((3, 1, 3))
        table[:, 0, 1] = [1.0, 0.0, 2.0]
        assert rank(TableScorer(table), (1, 0, "head"), 2) == 1
        assert rank(TableScorer(table), (1, 0, "head"), 1) == 3

    def test_truth_out_of_range(self):
        with pytest.raises(ContractViolation):
            rank(TableScorer(np.zeros((3, 1, 3))), (0, 0, "tail"), 7)

    def test_invariant_to_monotone_transform(self, rng):
        table = rng.normal(size=(12, 2, 12))
        store = TripleStore([(h, r, t) for h, r, t in zip(rng.integers(0, 12, 30), rng.integers(0, 2, 30),
                                                         rng.integers(0, 12, 30))])
        index = FilterIndex(store)
        plain = compute_ranks(TableScorer(table), store, index)
        transformed = compute_ranks(TableScorer(np.exp(3.0 * table) + 1.0), store, index)
        assert np.array_equal(plain, transformed)

    def test_filtering_never_hurts(self, rng):
        table = rng.normal(size=(10, 1, 10))
        store = TripleStore([(h, 0, t) for h, t in zip(rng.integers(0, 10, 25), rng.integers(0, 10, 25))])
        filtered = compute_ranks(TableScorer(table), store, FilterIndex(store))
        raw = compute_ranks(TableScorer(table), store, None)
        assert (filtered <= raw).all()

    def test_brute_force_oracle(self):
        """Ранги на случайных графах до 50 сущностей совпадают с сортировкой."""
        rng = np.random.default_rng(0)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(2, 51))
            m = int(rng.integers(1, 4))
            table = np.round(rng.normal(size=(n, m, n)), 1)
            triples = np.stack([rng.integers(0, n, 40), rng.integers(0, m, 40), rng.integers(0, n, 40)], axis=1)
            store = TripleStore(triples)
            known = set(map(tuple, store.array.tolist()))
            index = FilterIndex(store)
            ranks = compute_ranks(TableScorer(table), store, index, "both")
            expected = [brute_force_rank(table, h, r, t, "tail", known) for h, r, t in store.array.tolist()]
            expected += [brute_force_rank(table, h, r, t, "head", known) for h, r, t in store.array.tolist()]
            assert ranks.tolist() == expected
            checked += len(expected)


class TestMetrics:
    """Тесты метрик."""

    def test_all_first(self):
        metrics = metrics_from_ranks([1, 1, 1])
        assert metrics.mrr == metrics.hits1 == metrics.hits10 == 1.0

    def test_ranks_one_and_four(self):
        """Ранги 1 и 4: MRR = 0.625, Hits@1 = 0.5."""
        metrics = metrics_from_ranks([1, 4])
        assert metrics.mrr == pytest.approx(0.625)
        assert metrics.hits1 == 0.5
        assert metrics.hits5 == 1.0
        assert metrics.count == 2

    def test_empty(self):
        with pytest.raises(ContractViolation):
            metrics_from_ranks([])

    def test_bounds(self, rng):
        ranks = rng.integers(1, 30, size=100)
        metrics = metrics_from_ranks(ranks)
        assert metrics.hits1 <= metrics.hits5 <= metrics.hits10
        assert metrics.mrr >= metrics.hits1
        assert 1.0 / 29 <= metrics.mrr <= 1.0

    def test_evaluate_directions(self):
        table = np.zeros((3, 1, 3))
        table[0, 0, 1] = 1.0
        split = TripleStore([(0, 0, 1)])
        assert evaluate(TableScorer(table), split, directions="tail").count == 1
        assert evaluate(TableScorer(table), split, directions="both").count == 2
        with pytest.raises(ContractViolation):
            evaluate(TableScorer(table), split, directions="sideways")

    def test_evaluate_empty_split(self):
        with pytest.raises(ContractViolation):
            evaluate(TableScorer(np.zeros((2, 1, 2))), TripleStore())

    def test_weighted_average(self):
        """MRR 0.4 на 100 запросах и 0.2 на 300 -> 0.25."""
        a = Metrics(0.4, 0.3, 0.5, 0.6, 100)
        b = Metrics(0.2, 0.1, 0.3, 0.4, 300)
        average = weighted_average([a, b])
        assert average.mrr == pytest.approx(0.25)
        assert average.count == 400

    def test_equal_counts_plain_mean(self):
        a, b = Metrics(0.4, 0.2, 0.4, 0.6, 10), Metrics(0.2, 0.0, 0.2, 0.4, 10)
        assert weighted_average([a, b]).mrr == pytest.approx(0.3)
        assert weighted_average([a]) == a

    def test_average_errors(self):
        with pytest.raises(ContractViolation):
            weighted_average([])
        with pytest.raises(ContractViolation):
            weighted_average([Metrics(0.1, 0, 0, 0, 1)], weights=[0.0])

    def test_random_scorer_matches_expectation(self):
        """MRR случайного оценщика в пределах 3 стандартных ошибок от ожидания."""
        rng = np.random.default_rng(1)
        n = 40
        store = TripleStore([(h, 0, t) for h, t in zip(rng.choice(n, 300), rng.choice(n, 300)) if h != t])
        index = FilterIndex(store)
        metrics = evaluate(RandomScorer(n, rng), store, index, "tail")

        counts = [n - len(index.known(h, r, "tail")) + 1 for h, r, _ in store.array.tolist()]
        mean, stderr = expected_random_mrr(counts)
        assert abs(metrics.mrr - mean) < 3 * stderr

    def test_kge_scorer(self, rng):
        """Оценщик модели ранжирует истинный хвост первым, если h + r = t."""
        model = get_model("TransE")
        entities = rng.normal(size=(5, 4))
        relations = (entities[3] - entities[0])[None, :]
        scorer = KGEScorer(model, entities, relations)
        assert rank(scorer, (0, 0, "tail"), 3) == 1

    def test_rounds_to_threshold(self):
        history = [(5, Metrics(0.1, 0, 0, 0.3, 1)), (10, Metrics(0.2, 0, 0, 0.55, 1)),
                   (15, Metrics(0.3, 0, 0, 0.7, 1))]
        assert rounds_to_threshold(history, 0.5) == 10
        assert rounds_to_threshold(history, 0.9) is None
        assert rounds_to_threshold(history, 0.25, metric="mrr") == 15


class TestMetricsLog:
    """Тесты журнала метрик."""

    def test_header_and_rows(self, tmp_path):
        path = tmp_path / "metrics.tsv"
        log = MetricsLog(path)
        log.write_evaluation(5, "valid", {0: Metrics(0.5, 0.25, 0.75, 1.0, 4)}, Metrics(0.5, 0.25, 0.75, 1.0, 4))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].split("\t") == FIELDS
        assert lines[1] == "5\t0\tvalid\t0.5000000000\t0.2500000000\t0.7500000000\t1.0000000000"
        assert lines[2].split("\t")[1] == "avg"

    def test_append_and_truncate(self, tmp_path):
        path = tmp_path / "metrics.tsv"
        m = Metrics(0.1, 0.1, 0.1, 0.1, 1)
        log = MetricsLog(path)
        for round_number in (5, 10, 15):
            log.write_evaluation(round_number, "valid", {0: m}, m)
        log.write_evaluation(15, "test", {0: m}, m)

        resumed = MetricsLog(path, append=True)
        resumed.truncate_after(10)
        rows = read_metrics_log(path)
        assert [int(r["round"]) for r in rows] == [5, 5, 10, 10]
        assert all(r["split"] == "valid" for r in rows)

    def test_fresh_log_overwrites(self, tmp_path):
        path = tmp_path / "metrics.tsv"
        m = Metrics(0.1, 0.1, 0.1, 0.1, 1)
        MetricsLog(path).write_evaluation(1, "valid", {0: m}, m)
        MetricsLog(path)
        assert read_metrics_log(path) == []
