#!/usr/bin/env python3
"""
Тесты для функций оценки (kge_models/*) и их градиентов.
"""

import pytest
import sys
from pathlib import Path

import numpy as np

# Добавляем корневую папку проекта в путь
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from kge_models.base import ModelKind, TrainHyper, get_model
from kge_models.complex.complex_model import ComplExModel
from kge_models.distmult.distmult_model import DistMultModel
from kge_models.loss import loss_and_grad
from kge_models.rotate.rotate_model import RotatEModel
from kge_models.sampling import sample_negative_batch
from kge_models.transe.transe_model import TransEModel
from utils.errors import ConfigurationError, ContractViolation
from utils.gradient_check import check_gradients, relative_error

ALL_KINDS = [ModelKind.TRANSE, ModelKind.DISTMULT, ModelKind.COMPLEX, ModelKind.ROTATE]


def random_problem(model, rng, num_entities=12, num_relations=3, dim=8, batch=4, n_neg=5, corruption="both"):
    """Случайные параметры, позитивы и негативы для проверки градиентов."""
    entities = rng.normal(0.0, 0.5, size=(num_entities, dim))
    relations = model.init_relations(num_relations, dim, rng)
    if not isinstance(model, RotatEModel):
        relations = rng.normal(0.0, 0.5, size=relations.shape)
    positives = np.stack([rng.integers(0, num_entities, batch), rng.integers(0, num_relations, batch),
                          rng.integers(0, num_entities, batch)], axis=1)
    negatives = sample_negative_batch(positives, num_entities, n_neg, rng, corruption)
    return entities, relations, positives, negatives


class TestScores:
    """Тесты значений функций оценки."""

    def test_transe_exact_translation(self):
        """h + r = t даёт оценку 0."""
        model = TransEModel()
        assert model.score(np.array([1.0, 2.0]), np.array([0.5, -1.0]), np.array([1.5, 1.0])) == 0.0

    def test_transe_l1(self):
        model = TransEModel(p_norm=1)
        assert model.score(np.array([0.0, 0.0]), np.array([1.0, -2.0]), np.array([0.0, 0.0])) == -3.0

    def test_transe_bad_norm(self):
        with pytest.raises(ConfigurationError):
            TransEModel(p_norm=3)

    def test_distmult_hand_value(self):
        """1·3·5 + 2·4·6 = 63."""
        model = DistMultModel()
        assert model.score(np.array([1.0, 2.0]), np.array([3.0, 4.0]), np.array([5.0, 6.0])) == 63.0

    def test_complex_reduces_to_distmult(self, rng):
        """ComplEx с нулевыми мнимыми частями совпадает с DistMult на вещественных частях."""
        real = rng.normal(size=(3, 4))
        interleaved = np.zeros((3, 8))
        interleaved[:, 0::2] = real
        complex_score = ComplExModel().score(interleaved[0], interleaved[1], interleaved[2])
        distmult_score = DistMultModel().score(real[0], real[1], real[2])
        assert complex_score == distmult_score

    def test_distmult_symmetric(self, rng):
        """DistMult не различает направление: f(h, r, t) = f(t, r, h)."""
        model = DistMultModel()
        for _ in range(20):
            h, r, t = rng.normal(size=(3, 8))
            assert model.score(h, r, t) == pytest.approx(model.score(t, r, h), rel=1e-12, abs=1e-12)

        entities = rng.normal(size=(5, 8))
        relations = rng.normal(size=(2, 8))
        anchors, rels = np.array([0, 4, 2]), np.array([1, 0, 1])
        tails = model.score_candidates(entities[anchors], relations[rels], entities, "tail")
        heads = model.score_candidates(entities[anchors], relations[rels], entities, "head")
        assert np.allclose(tails, heads, rtol=1e-12, atol=1e-12)

    def test_complex_not_symmetric(self, rng):
        model = ComplExModel()
        h, r, t = rng.normal(size=(3, 8))
        assert not np.isclose(model.score(h, r, t), model.score(t, r, h))

    def test_rotate_identity(self, rng):
        """Нулевые фазы и h = t дают 0."""
        h = rng.normal(size=8)
        assert RotatEModel().score(h, np.zeros(4), h) == 0.0

    def test_rotate_relation_is_unit_modulus(self, rng):
        """Поворот не меняет модуль: |h∘r| = |h| покомпонентно."""
        model = RotatEModel()
        h = rng.normal(size=8)
        phases = rng.uniform(0, 2 * np.pi, size=4)
        rotated_re, rotated_im = model._rotate(h, phases)
        assert np.allclose(rotated_re ** 2 + rotated_im ** 2, h[0::2] ** 2 + h[1::2] ** 2)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            DistMultModel().score(np.zeros(2), np.zeros(3), np.zeros(2))

    def test_odd_dimension_rejected(self):
        with pytest.raises(ContractViolation):
            ComplExModel().score(np.zeros(3), np.zeros(3), np.zeros(3))
        with pytest.raises(ContractViolation):
            RotatEModel().score(np.zeros(3), np.zeros(1), np.zeros(3))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("side", ["tail", "head"])
    def test_candidates_match_pointwise(self, kind, side, rng):
        """score_candidates совпадает с поштучной оценкой."""
        model = get_model(kind)
        entities = rng.normal(size=(6, 8))
        relations = model.init_relations(2, 8, rng)
        anchors, rels = np.array([0, 3]), np.array([1, 0])
        matrix = model.score_candidates(entities[anchors], relations[rels], entities, side)
        for q in range(2):
            for c in range(6):
                if side == "tail":
                    expected = model.score(entities[anchors[q]], relations[rels[q]], entities[c])
                else:
                    expected = model.score(entities[c], relations[rels[q]], entities[anchors[q]])
                assert matrix[q, c] == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestModelFactory:
    """Тесты выбора модели."""

    def test_get_model(self):
        assert isinstance(get_model("TransE"), TransEModel)
        assert isinstance(get_model(ModelKind.DISTMULT), DistMultModel)
        assert isinstance(get_model("ComplEx"), ComplExModel)
        assert isinstance(get_model("RotatE"), RotatEModel)
        assert get_model("TransE", p_norm=1).p_norm == 1

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            get_model("TuckER")

    def test_margin_shift(self):
        """auto: сдвиг +γ для моделей расстояния, -γ для остальных."""
        assert TransEModel().margin_shift(10.0, "auto") == 10.0
        assert RotatEModel().margin_shift(10.0, "auto") == 10.0
        assert DistMultModel().margin_shift(10.0, "auto") == -10.0
        assert ComplExModel().margin_shift(10.0, "auto") == -10.0
        assert TransEModel().margin_shift(10.0, "subtract") == -10.0
        assert DistMultModel().margin_shift(10.0, "offset") == 10.0

    def test_relation_dim(self):
        assert RotatEModel().relation_dim(8) == 4
        assert ComplExModel().relation_dim(8) == 8

    def test_init_shapes(self, rng):
        model = RotatEModel()
        assert model.init_entities(5, 8, rng).shape == (5, 8)
        phases = model.init_relations(3, 8, rng)
        assert phases.shape == (3, 4)
        assert ((phases >= 0) & (phases < 2 * np.pi)).all()


class TestGradients:
    """Сравнение аналитических градиентов с конечными разностями."""

    @pytest.mark.parametrize("kind", ALL_KINDS)
    @pytest.mark.parametrize("corruption", ["both", "tail"])
    def test_matches_finite_differences(self, kind, corruption):
        model = get_model(kind)
        hyper = TrainHyper(gamma=1.0, alpha=1.0, n_neg=5, dim=8)
        rng = np.random.default_rng(2024)
        for _ in range(10):
            entities, relations, positives, negatives = random_problem(model, rng, corruption=corruption)
            ent_a, ent_n, rel_a, rel_n = check_gradients(model, positives, negatives, entities, relations, hyper)
            np.testing.assert_allclose(ent_a, ent_n, rtol=1e-4, atol=1e-8)
            np.testing.assert_allclose(rel_a, rel_n, rtol=1e-4, atol=1e-8)

    @pytest.mark.parametrize("mode", ["subtract", "offset"])
    def test_both_margin_modes(self, mode):
        model = get_model(ModelKind.DISTMULT)
        hyper = TrainHyper(gamma=2.0, alpha=0.5, n_neg=3, dim=8, margin_mode=mode)
        rng = np.random.default_rng(7)
        entities, relations, positives, negatives = random_problem(model, rng)
        ent_a, ent_n, rel_a, rel_n = check_gradients(model, positives, negatives, entities, relations, hyper)
        np.testing.assert_allclose(ent_a, ent_n, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(rel_a, rel_n, rtol=1e-4, atol=1e-8)

    def test_transe_l1(self):
        model = TransEModel(p_norm=1)
        hyper = TrainHyper(gamma=1.0, n_neg=4, dim=8, p_norm=1)
        rng = np.random.default_rng(99)
        entities, relations, positives, negatives = random_problem(model, rng)
        ent_a, ent_n, rel_a, rel_n = check_gradients(model, positives, negatives, entities, relations, hyper)
        np.testing.assert_allclose(ent_a, ent_n, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(rel_a, rel_n, rtol=1e-4, atol=1e-8)

    def test_transe_l1_zero_coordinate_subgradient(self):
        """В нулевой координате разности используется субградиент 0."""
        model = TransEModel(p_norm=1)
        _, gh, gr, gt = model.score_grad(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]))
        assert gh[0, 0] == 0.0
        assert gh[0, 1] == -1.0
        assert gt[0, 1] == 1.0

    def test_distmult_zero_relation(self):
        """Нулевая строка отношения: градиенты по сущностям от оценки нулевые."""
        model = DistMultModel()
        h, r, t = np.ones((1, 4)), np.zeros((1, 4)), np.full((1, 4), 2.0)
        _, gh, _, gt = model.score_grad(h, r, t)
        assert not gh.any() and not gt.any()

    def test_only_touched_rows(self, rng):
        """Градиент содержит ровно строки из позитивов и негативов."""
        model = get_model(ModelKind.TRANSE)
        hyper = TrainHyper(gamma=1.0, n_neg=2, dim=8)
        entities, relations, positives, negatives = random_problem(model, rng, num_entities=30, batch=2, n_neg=2)
        _, ent_grad, rel_grad = loss_and_grad(model, positives, negatives, entities, relations, hyper)
        heads, _, tails = negatives.expand(positives)
        touched = np.unique(np.concatenate([positives[:, 0], positives[:, 2], heads.ravel(), tails.ravel()]))
        assert np.array_equal(ent_grad.rows, touched)
        assert np.array_equal(rel_grad.rows, np.unique(positives[:, 1]))

    def test_relative_error(self):
        assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
        assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)
        assert relative_error(np.zeros(0), np.zeros(0)) == 0.0
