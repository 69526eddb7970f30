#!/usr/bin/env python3
"""
Долгие проверки на синтетическом графе: градиенты на большом числе батчей,
обучаемость постановок, выигрыш федерации и слияния, перебор доли клиентов.

Запуск: pytest -m slow
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Добавляем корневую папку проекта в путь
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from federation.experiment import (ExperimentConfig, LocalConfig, build_trainer, evaluate_scorers, run_experiment,
                                   run_fusion, snapshot_sections)
from federation.rounds import RoundConfig
from federation.sweep import FRACTION_GRID, run_sweep
from kge_models.base import ModelKind, TrainHyper, get_model
from kge_models.fusion.fusion_model import FusionConfig
from test_models import random_problem
from utils.gradient_check import check_gradients
from utils.metadata_utils import mean_pairwise_overlap
from utils.metrics import FilterIndex, expected_random_mrr
from utils.optimizers import OptimizerConfig
from utils.synthetic_kg import synthetic_federated_dataset

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def synthetic_dataset():
    return synthetic_federated_dataset(num_clients=3, num_entities=200, num_relations=12, num_triples=2000, seed=0)


def training_config(setting, seed=0, **rounds):
    round_values = dict(fraction=1.0, local_epochs=3, batch_size=256, max_rounds=40, eval_every=5, patience=5)
    round_values.update(rounds)
    return ExperimentConfig(
        setting=setting,
        seed=seed,
        model=ModelKind.TRANSE,
        train=TrainHyper(gamma=4.0, alpha=1.0, n_neg=32, dim=32),
        optimizer=OptimizerConfig(lr=0.01),
        rounds=RoundConfig(**round_values),
        local=LocalConfig(max_epochs=120, eval_every=15, patience=5),
    )


def random_baseline(dataset) -> float:
    """Ожидаемая MRR случайного ранжирования test по всем клиентам."""
    counts = []
    for shard in dataset.clients:
        index = FilterIndex.from_shard(shard)
        for h, r, t in shard.test.array.tolist():
            counts.append(shard.num_entities - len(index.known(h, r, "tail")) + 1)
            counts.append(shard.num_entities - len(index.known(t, r, "head")) + 1)
    return expected_random_mrr(counts)[0]


def untrained_valid_mrr(dataset, cfg) -> float:
    """Средняя valid MRR клиентов сразу после инициализации."""
    trainer = build_trainer(dataset, cfg.copy(update={"setting": "single"}))
    scorers = {client.client_id: client.scorer() for client in trainer.trained_clients()}
    return evaluate_scorers(scorers, dataset, "valid", cfg.directions).average.mrr


def adjacent_inversions(values) -> int:
    """Число соседних пар, где значение выросло."""
    return sum(1 for left, right in zip(values, values[1:]) if right > left)


class TestGradientsAtScale:
    """Градиенты всех моделей на 100 случайных батчах."""

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_hundred_batches(self, kind):
        model = get_model(kind)
        hyper = TrainHyper(gamma=1.0, alpha=1.0, n_neg=5, dim=8)
        rng = np.random.default_rng(100)
        for _ in range(100):
            entities, relations, positives, negatives = random_problem(model, rng)
            ent_a, ent_n, rel_a, rel_n = check_gradients(model, positives, negatives, entities, relations, hyper)
            np.testing.assert_allclose(ent_a, ent_n, rtol=1e-4, atol=1e-8)
            np.testing.assert_allclose(rel_a, rel_n, rtol=1e-4, atol=1e-8)


class TestLearning:
    """Обучение на графе со скрытой структурой заметно лучше случайного ранжирования."""

    @pytest.mark.parametrize("setting", ["single", "entire", "fed"])
    def test_beats_random(self, synthetic_dataset, setting):
        result = run_experiment(training_config(setting), synthetic_dataset)
        assert result.test.average.mrr > 3 * random_baseline(synthetic_dataset)

    def test_validation_improves(self, synthetic_dataset):
        result = run_experiment(training_config("fed"), synthetic_dataset)
        history = [r.average.mrr for r in result.result.history]
        assert max(history) > history[0]

    @pytest.mark.parametrize("setting", ["single", "fed"])
    def test_best_valid_far_above_untrained(self, synthetic_dataset, setting):
        """Лучшая valid MRR не меньше пятикратной MRR необученных эмбеддингов."""
        cfg = training_config(setting)
        untrained = untrained_valid_mrr(synthetic_dataset, cfg)
        result = run_experiment(cfg, synthetic_dataset)
        assert result.result.best.average.mrr >= 5 * untrained


class TestFederationGain:
    """Общие эмбеддинги сущностей помогают клиентам с пересекающимися сущностями."""

    def test_fed_beats_single_across_seeds(self):
        wins, gaps = 0, []
        for seed in range(5):
            dataset = synthetic_federated_dataset(3, 200, 12, 2000, seed=seed)
            assert mean_pairwise_overlap(dataset) >= 0.6
            single = run_experiment(training_config("single", seed=seed), dataset)
            fed = run_experiment(training_config("fed", seed=seed), dataset)
            gaps.append(fed.test.average.mrr - single.test.average.mrr)
            wins += gaps[-1] > 0
        assert wins >= 4, f"FedE лучше Single только в {wins} из 5: {gaps}"
        assert np.mean(gaps) > 0


class TestFusionGain:
    """Слияние не хуже лучшей из компонент на части, где оно обучалось."""

    def test_fused_valid_near_best_component(self, synthetic_dataset):
        single_cfg, fed_cfg = training_config("single"), training_config("fed")
        single = run_experiment(single_cfg, synthetic_dataset)
        fed = run_experiment(fed_cfg, synthetic_dataset)
        report = run_fusion(0, FusionConfig(), synthetic_dataset,
                            snapshot_sections(single_cfg, synthetic_dataset, single.result.best),
                            snapshot_sections(fed_cfg, synthetic_dataset, fed.result.best))

        valid = {variant: report.records[variant]["valid"].per_client for variant in ("single", "fed", "fused")}
        for shard in synthetic_dataset.clients:
            c = shard.client_id
            best_component = max(valid["single"][c].mrr, valid["fed"][c].mrr)
            assert valid["fused"][c].mrr >= best_component - 0.005


class TestFractionSweep:
    """Перебор доли клиентов F."""

    def test_shape(self, synthetic_dataset):
        base = training_config("fed", max_rounds=10)
        summary = run_sweep(base, synthetic_dataset, "fraction", seeds=[0, 1], threshold=0.3)
        assert len(summary.rows) == 6
        means = summary.mean_rounds(base.rounds.max_rounds)
        assert sorted(means) == [(0.2, 3, 256), (0.6, 3, 256), (1.0, 3, 256)]
        assert all(0 < value <= 10 for value in means.values())

    def test_more_clients_need_fewer_rounds(self, synthetic_dataset):
        """Среднее число раундов до valid Hits@10 = 0.5 не растёт с F (допускается одна инверсия)."""
        base = training_config("fed", max_rounds=40, eval_every=1, patience=10)
        summary = run_sweep(base, synthetic_dataset, "fraction", seeds=range(5), threshold=0.5)
        assert len(summary.rows) == 15
        means = summary.mean_rounds(base.rounds.max_rounds)
        by_fraction = [means[(f, 3, 256)] for f in FRACTION_GRID]
        assert adjacent_inversions(by_fraction) <= 1, by_fraction
        assert by_fraction[0] >= by_fraction[-1], by_fraction
