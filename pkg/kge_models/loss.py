"""
Функция потерь с самосостязательным взвешиванием негативов и её градиент.

Для триплета (h, r, t) и негативов t'_i:
    L = -log σ(f + δ) - Σ_i p_i log σ(-(f'_i + δ)),
    p_i = softmax(α f'_i)
где δ = -γ (вычитание отступа) или δ = +γ (сдвиг для моделей расстояния,
у которых f = -||·|| <= 0). Веса p_i - константы, градиент через них не идёт.
Потери батча - среднее по позитивам.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import expit, log_expit, softmax

from kge_models.base import CHUNK_ELEMENTS, BaseKGEModel, TrainHyper
from kge_models.sampling import NegativeBatch
from utils.errors import ContractViolation
from utils.optimizers import SparseGrad


def adversarial_weights(neg_scores: np.ndarray, alpha: float) -> np.ndarray:
    """
    Веса негативов p_j = exp(α f_j) / Σ_i exp(α f_i) по последней оси.
    Softmax из scipy вычитает максимум, поэтому устойчив к большим оценкам.
    """
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if neg_scores.size == 0:
        raise ContractViolation("Список оценок негативов пуст")
    return softmax(alpha * neg_scores, axis=-1)


def loss_from_scores(pos_scores: np.ndarray, neg_scores: np.ndarray, shift: float, alpha: float,
                     weights: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Потери каждого позитива по готовым оценкам.

    Args:
        pos_scores: (B,) оценки позитивов
        neg_scores: (B, n_neg) оценки негативов
        shift: δ
        alpha: температура α
        weights: готовые веса p (если None - считаются по neg_scores)

    Returns:
        (B,) потери
    """
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if weights is None:
        weights = adversarial_weights(neg_scores, alpha)
    return -log_expit(pos_scores + shift) - (weights * log_expit(-(neg_scores + shift))).sum(axis=-1)


def _check(positives: np.ndarray, negatives: NegativeBatch, entity_matrix: np.ndarray,
           relation_matrix: np.ndarray) -> np.ndarray:
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    if len(positives) != len(negatives):
        raise ContractViolation(f"Позитивов {len(positives)}, а групп негативов {len(negatives)}")
    n, m = len(entity_matrix), len(relation_matrix)
    if len(positives) and (positives[:, [0, 2]].max() >= n or positives[:, 1].max() >= m or positives.min() < 0):
        raise ContractViolation("Индекс триплета вне словаря")
    if negatives.entities.size and (negatives.entities.min() < 0 or negatives.entities.max() >= n):
        raise ContractViolation("Индекс негатива вне словаря")
    return positives


def _chunk_size(negatives: NegativeBatch, dim: int) -> int:
    return max(1, CHUNK_ELEMENTS // max(1, negatives.n_neg * dim))


def batch_scores(model: BaseKGEModel, positives: np.ndarray, negatives: NegativeBatch,
                 entity_matrix: np.ndarray, relation_matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Оценки позитивов (B,) и негативов (B, n_neg)."""
    positives = _check(positives, negatives, entity_matrix, relation_matrix)
    E, R = entity_matrix, relation_matrix
    pos = model.score(E[positives[:, 0]], R[positives[:, 1]], E[positives[:, 2]])

    heads, rels, tails = negatives.expand(positives)
    neg = np.empty(heads.shape)
    chunk = _chunk_size(negatives, E.shape[1])
    for s in range(0, len(positives), chunk):
        sl = slice(s, s + chunk)
        neg[sl] = model.score(E[heads[sl]], R[rels[sl]], E[tails[sl]])
    return pos, neg


def loss(model: BaseKGEModel, positives: np.ndarray, negatives: NegativeBatch,
         entity_matrix: np.ndarray, relation_matrix: np.ndarray, hyper: TrainHyper,
         weights: Optional[np.ndarray] = None) -> float:
    """Средние потери батча."""
    pos, neg = batch_scores(model, positives, negatives, entity_matrix, relation_matrix)
    shift = model.margin_shift(hyper.gamma, hyper.margin_mode)
    return float(loss_from_scores(pos, neg, shift, hyper.alpha, weights).mean())


def loss_and_grad(model: BaseKGEModel, positives: np.ndarray, negatives: NegativeBatch,
                  entity_matrix: np.ndarray, relation_matrix: np.ndarray, hyper: TrainHyper,
                  weights: Optional[np.ndarray] = None) -> Tuple[float, SparseGrad, SparseGrad]:
    """
    Средние потери батча и их точный градиент по затронутым строкам.

    Args:
        model: Функция оценки
        positives: (B, 3) позитивы в локальных индексах
        negatives: Негативы батча
        entity_matrix: Эмбеддинги сущностей (n, d)
        relation_matrix: Эмбеддинги отношений (m, d_r)
        hyper: Гиперпараметры (γ, α, форма отступа)
        weights: Зафиксированные веса негативов (B, n_neg); по умолчанию считаются

    Returns:
        (loss, градиент по сущностям, градиент по отношениям)
    """
    positives = _check(positives, negatives, entity_matrix, relation_matrix)
    E, R = entity_matrix, relation_matrix
    batch = len(positives)
    shift = model.margin_shift(hyper.gamma, hyper.margin_mode)

    heads, rels, tails = negatives.expand(positives)
    ent_rows = np.unique(np.concatenate([positives[:, 0], positives[:, 2], heads.ravel(), tails.ravel()]))
    rel_rows = np.unique(positives[:, 1])
    ent_grad = np.zeros((len(ent_rows), E.shape[1]))
    rel_grad = np.zeros((len(rel_rows), R.shape[1]))

    def accumulate(buffer, rows, ids, values):
        np.add.at(buffer, np.searchsorted(rows, ids.ravel()), values.reshape(-1, buffer.shape[1]))

    h, r, t = positives[:, 0], positives[:, 1], positives[:, 2]
    f_pos, g_h, g_r, g_t = model.score_grad(E[h], R[r], E[t])
    coef_pos = -expit(-(f_pos + shift)) / batch
    accumulate(ent_grad, ent_rows, h, coef_pos[:, None] * g_h)
    accumulate(ent_grad, ent_rows, t, coef_pos[:, None] * g_t)
    accumulate(rel_grad, rel_rows, r, coef_pos[:, None] * g_r)

    losses = -log_expit(f_pos + shift)
    chunk = _chunk_size(negatives, E.shape[1])
    for s in range(0, batch, chunk):
        sl = slice(s, s + chunk)
        f_neg, gn_h, gn_r, gn_t = model.score_grad(E[heads[sl]], R[rels[sl]], E[tails[sl]])
        p = adversarial_weights(f_neg, hyper.alpha) if weights is None else weights[sl]
        losses[sl] -= (p * log_expit(-(f_neg + shift))).sum(axis=-1)

        coef_neg = (p * expit(f_neg + shift) / batch)[..., None]
        accumulate(ent_grad, ent_rows, heads[sl], coef_neg * gn_h)
        accumulate(ent_grad, ent_rows, tails[sl], coef_neg * gn_t)
        accumulate(rel_grad, rel_rows, rels[sl], coef_neg * gn_r)

    return float(losses.mean()), SparseGrad(ent_rows, ent_grad), SparseGrad(rel_rows, rel_grad)


def grad(model: BaseKGEModel, positives: np.ndarray, negatives: NegativeBatch,
         entity_matrix: np.ndarray, relation_matrix: np.ndarray, hyper: TrainHyper,
         weights: Optional[np.ndarray] = None) -> Tuple[SparseGrad, SparseGrad]:
    """Градиент средних потерь батча: (сущности, отношения)."""
    _, ent, rel = loss_and_grad(model, positives, negatives, entity_matrix, relation_matrix, hyper, weights)
    return ent, rel
