"""
Проверка аналитических градиентов центральными конечными разностями.
"""

from typing import Callable, Tuple

import numpy as np

from kge_models.base import BaseKGEModel, TrainHyper
from kge_models.loss import adversarial_weights, batch_scores, loss, loss_and_grad
from kge_models.sampling import NegativeBatch

FD_STEP = 1e-5


def numerical_gradient(fn: Callable[[], float], params: np.ndarray, rows: np.ndarray,
                       step: float = FD_STEP) -> np.ndarray:
    """
    Центральные разности fn по строкам rows матрицы params (меняется на месте
    и восстанавливается).

    Returns:
        (len(rows), d)
    """
    grad = np.zeros((len(rows), params.shape[1]))
    for i, row in enumerate(rows):
        for j in range(params.shape[1]):
            original = params[row, j]
            params[row, j] = original + step
            upper = fn()
            params[row, j] = original - step
            lower = fn()
            params[row, j] = original
            grad[i, j] = (upper - lower) / (2 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a|, |n|, floor) по всем элементам."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def check_gradients(model: BaseKGEModel, positives: np.ndarray, negatives: NegativeBatch,
                    entity_matrix: np.ndarray, relation_matrix: np.ndarray, hyper: TrainHyper,
                    step: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Аналитический и численный градиенты средних потерь батча.
    Веса негативов фиксируются по текущим оценкам, как в обучении.

    Returns:
        (аналитический по сущностям, численный по сущностям,
         аналитический по отношениям, численный по отношениям) на затронутых строках
    """
    _, neg_scores = batch_scores(model, positives, negatives, entity_matrix, relation_matrix)
    weights = adversarial_weights(neg_scores, hyper.alpha)

    _, entity_grad, relation_grad = loss_and_grad(model, positives, negatives, entity_matrix,
                                                  relation_matrix, hyper, weights)

    def fn() -> float:
        return loss(model, positives, negatives, entity_matrix, relation_matrix, hyper, weights)

    entity_numeric = numerical_gradient(fn, entity_matrix, entity_grad.rows, step)
    relation_numeric = numerical_gradient(fn, relation_matrix, relation_grad.rows, step)
    return entity_grad.values, entity_numeric, relation_grad.values, relation_numeric
