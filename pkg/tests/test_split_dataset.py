#!/usr/bin/env python3
"""
Тесты для федеративного разбиения (utils/split_dataset.py, utils/metadata_utils.py).
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Добавляем корневую папку проекта в путь
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from utils.errors import ConfigurationError, KGParseError
from utils.kg_data import TripleStore, Vocabulary
from utils.metadata_utils import DatasetValidator, entity_overlap, generate_report, mean_pairwise_overlap
from utils.split_dataset import (MANIFEST_NAME, federate_split, load_federated_dataset, shard_stats,
                                 write_federated_dataset)
from utils.synthetic_kg import generate_synthetic_kg, synthetic_federated_dataset


@pytest.fixture
def toy():
    """{(a, r1, b), (a, r2, c)}"""
    vocab = Vocabulary(["a", "b", "c"], ["r1", "r2"])
    return TripleStore([(0, 0, 1), (0, 1, 2)]), vocab


@pytest.fixture
def synthetic():
    return generate_synthetic_kg(num_entities=50, num_relations=8, num_triples=300, seed=3)


class TestFederateSplit:
    """Тесты разбиения по отношениям."""

    def test_toy_two_clients(self, toy):
        """Каждый клиент получает ровно триплеты одного отношения."""
        store, vocab = toy
        dataset = federate_split(store, vocab, 2, seed=0)
        assert dataset.num_clients == 2
        assert sorted(s.num_relations for s in dataset.clients) == [1, 1]
        assert sorted(r for s in dataset.clients for r in s.vocab.relations) == ["r1", "r2"]
        assert all(s.num_triples == 1 for s in dataset.clients)

    def test_single_client_keeps_everything(self, synthetic):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 1, seed=0)
        shard = dataset.clients[0]
        assert shard.num_triples == len(store)
        assert len(shard.valid) == int(np.floor(len(store) * 0.1))
        assert len(shard.test) == int(np.floor(len(store) * 0.1))

    def test_too_many_clients(self, toy):
        store, vocab = toy
        with pytest.raises(ConfigurationError):
            federate_split(store, vocab, 3)

    def test_bad_ratios(self, toy):
        store, vocab = toy
        with pytest.raises(ConfigurationError):
            federate_split(store, vocab, 1, ratios=(0.5, 0.5, 0.5))

    def test_empty_store(self):
        with pytest.raises(ConfigurationError):
            federate_split(TripleStore(), Vocabulary(), 1)

    def test_invariants(self, synthetic):
        """Отношения не пересекаются, триплеты сохраняются, утечек нет."""
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 3, seed=7)
        assert DatasetValidator.validate(dataset, len(store))

    def test_relations_balanced(self, synthetic):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 3, seed=7)
        counts = [s.num_relations for s in dataset.clients]
        assert max(counts) - min(counts) <= 1

    def test_deterministic(self, synthetic):
        """Одинаковые входы и seed - одинаковое разбиение."""
        store, vocab = synthetic
        first = federate_split(store, vocab, 3, seed=11)
        second = federate_split(store, vocab, 3, seed=11)
        for a, b in zip(first.clients, second.clients):
            assert a.vocab == b.vocab
            assert a.train == b.train and a.valid == b.valid and a.test == b.test

    def test_seed_changes_partition(self, synthetic):
        store, vocab = synthetic
        first = federate_split(store, vocab, 3, seed=0)
        second = federate_split(store, vocab, 3, seed=1)
        assert [s.vocab.relations for s in first.clients] != [s.vocab.relations for s in second.clients]


class TestStats:
    """Тесты статистики разбиения."""

    def test_counts_sum(self, synthetic):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 4, seed=0)
        stats = shard_stats(dataset)
        assert sum(s.num_triples for s in stats.per_client) == len(store)
        assert stats.avg_triples == pytest.approx(len(store) / 4)
        assert stats.avg_relations == pytest.approx(2.0)

    def test_report_has_all_clients(self, synthetic):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 2, seed=0)
        report = generate_report(shard_stats(dataset))
        assert report.count("\n") == 5
        assert "avg" in report

    def test_overlap_matrix(self, synthetic):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 3, seed=0)
        overlap = entity_overlap(dataset)
        assert overlap.shape == (3, 3)
        assert np.allclose(np.diag(overlap), 1.0)
        assert np.allclose(overlap, overlap.T)
        assert 0.0 < mean_pairwise_overlap(dataset) <= 1.0


class TestManifest:
    """Тесты записи и чтения разбиения."""

    def test_write_and_load(self, synthetic, tmp_path):
        """Загруженное разбиение совпадает с записанным."""
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 3, seed=5)
        manifest = write_federated_dataset(dataset, tmp_path / "split")
        assert manifest.name == MANIFEST_NAME

        loaded = load_federated_dataset(manifest)
        assert loaded.seed == 5
        assert loaded.vocabulary == dataset.vocabulary
        for a, b in zip(dataset.clients, loaded.clients):
            assert a.client_id == b.client_id
            assert a.vocab == b.vocab
            assert a.train == b.train and a.valid == b.valid and a.test == b.test

    def test_rewrite_is_byte_identical(self, synthetic, tmp_path):
        store, vocab = synthetic
        dataset = federate_split(store, vocab, 2, seed=5)
        first = write_federated_dataset(dataset, tmp_path / "a")
        second = write_federated_dataset(load_federated_dataset(first), tmp_path / "b")
        assert first.read_bytes() == second.read_bytes()
        for name in ("train", "valid", "test"):
            assert ((tmp_path / "a" / "client_0" / f"{name}.txt").read_bytes()
                    == (tmp_path / "b" / "client_0" / f"{name}.txt").read_bytes())

    def test_missing_header(self, tmp_path):
        path = tmp_path / MANIFEST_NAME
        path.write_text("0\ta\tb\tc\tr\n", encoding="utf-8")
        with pytest.raises(KGParseError):
            load_federated_dataset(path)


class TestSyntheticKG:
    """Тесты синтетического графа, на котором проверяется обучение."""

    @pytest.mark.parametrize("seed", range(5))
    def test_acceptance_graph_overlaps(self, seed):
        """3 клиента, 200 сущностей, 12 отношений, 2000 триплетов: пересечение сущностей не меньше 60%."""
        dataset = synthetic_federated_dataset(3, 200, 12, 2000, seed=seed)
        assert dataset.num_clients == 3
        assert sum(s.num_triples for s in dataset.clients) == 2000
        assert sorted(r for s in dataset.clients for r in s.vocab.relations) == sorted(f"r{j}" for j in range(12))
        assert mean_pairwise_overlap(dataset) >= 0.6

    def test_deterministic(self):
        first, _ = generate_synthetic_kg(60, 4, 150, seed=7)
        second, _ = generate_synthetic_kg(60, 4, 150, seed=7)
        assert np.array_equal(first.array, second.array)

    def test_too_many_triples(self):
        with pytest.raises(ConfigurationError):
            generate_synthetic_kg(num_entities=5, num_relations=2, num_triples=11)
