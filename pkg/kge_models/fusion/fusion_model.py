"""
Слияние оценок двух моделей клиента: обученной локально (single) и
федеративно (fed). Итоговая оценка s = W·[f_single; f_fed] + b, параметры
(W, b) обучаются с margin ranking loss при замороженных моделях.
"""

import logging
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, validator

from kge_models.sampling import sample_negative_batch
from kge_models.scorer import KGEScorer
from utils.errors import ContractViolation
from utils.kg_data import TripleStore
from utils.metrics import FilterIndex, evaluate

logger = logging.getLogger(__name__)


class FusionConfig(BaseModel):
    """Параметры обучения слияния"""
    beta: float = 10.0
    n_neg: int = 1
    epochs: int = 100
    lr: float = 0.01
    batch_size: int = 512
    train_split: Literal["valid", "train"] = "valid"
    keep_best: bool = True

    class Config:
        extra = "forbid"

    @validator("beta", "lr")
    def _positive_float(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("значение должно быть > 0")
        return value

    @validator("n_neg", "batch_size")
    def _positive_int(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("значение должно быть > 0")
        return value

    @validator("epochs")
    def _epochs_non_negative(cls, value: int) -> int:
        if value < 0:
            raise ValueError("число эпох должно быть >= 0")
        return value


@dataclass
class FusionModel:
    """Линейное слияние двух оценщиков одного клиента"""
    single: KGEScorer
    fed: KGEScorer
    weight: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))
    bias: float = 0.0

    def __post_init__(self):
        if self.single.num_entities != self.fed.num_entities:
            raise ContractViolation(
                f"Оценщики с разными словарями: {self.single.num_entities} != {self.fed.num_entities}")
        self.weight = np.asarray(self.weight, dtype=np.float64).reshape(2)
        self.bias = float(self.bias)

    @property
    def num_entities(self) -> int:
        return self.single.num_entities

    def features(self, triples: np.ndarray) -> np.ndarray:
        """x = [f_single, f_fed] для триплетов (..., 3) -> (..., 2)."""
        return np.stack([self.single.score_triples(triples), self.fed.score_triples(triples)], axis=-1)

    def score_triples(self, triples: np.ndarray) -> np.ndarray:
        return self.features(triples) @ self.weight + self.bias

    def score_queries(self, anchors: np.ndarray, relations: np.ndarray, side: str) -> np.ndarray:
        return (self.weight[0] * self.single.score_queries(anchors, relations, side)
                + self.weight[1] * self.fed.score_queries(anchors, relations, side)
                + self.bias)


def fused_score(model: FusionModel, triple: Tuple[int, int, int]) -> float:
    """Итоговая оценка одного триплета."""
    return float(model.score_triples(np.asarray([triple]))[0])


def hinge_loss_and_grad(weight: np.ndarray, bias: float, pos_features: np.ndarray, neg_features: np.ndarray,
                        beta: float) -> Tuple[float, np.ndarray, float]:
    """
    Средний hinge max(0, β - s_pos + s_neg) по парам и его градиент по (W, b).

    Args:
        pos_features: (N, 2) признаки позитивов
        neg_features: (N, 2) признаки соответствующих негативов

    Returns:
        (loss, dW, db); db всегда 0, так как b сокращается в разности
    """
    margins = beta - (pos_features - neg_features) @ weight
    active = margins > 0
    count = max(1, len(margins))
    loss = float(np.where(active, margins, 0.0).sum() / count)
    grad_weight = (neg_features[active] - pos_features[active]).sum(axis=0) / count
    return loss, grad_weight, 0.0


def train_fusion(model: FusionModel, triples: Union[TripleStore, np.ndarray], cfg: FusionConfig,
                 rng: np.random.Generator) -> FusionModel:
    """
    Обучает (W, b) градиентным спуском по мини-батчам; оценщики не меняются.
    Негативы - равномерная замена головы или хвоста, заново на каждой эпохе.
    """
    positives = triples.array if isinstance(triples, TripleStore) else np.asarray(triples, dtype=np.int64)
    if len(positives) == 0:
        logger.warning("Нет триплетов для обучения слияния, параметры не меняются")
        return model

    pos_features = model.features(positives)
    for epoch in range(cfg.epochs):
        negatives = sample_negative_batch(positives, model.num_entities, cfg.n_neg, rng)
        heads, relations, tails = negatives.expand(positives)
        neg_features = model.features(np.stack([heads, relations, tails], axis=-1))

        order = rng.permutation(len(positives))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            pos = np.repeat(pos_features[batch], cfg.n_neg, axis=0)
            neg = neg_features[batch].reshape(-1, 2)
            _, grad_weight, grad_bias = hinge_loss_and_grad(model.weight, model.bias, pos, neg, cfg.beta)
            model.weight = model.weight - cfg.lr * grad_weight
            model.bias = model.bias - cfg.lr * grad_bias

    logger.info(f"Слияние обучено: W={model.weight.tolist()}, b={model.bias}")
    return model


def select_weights(model: FusionModel, split: TripleStore, filter_index: Optional[FilterIndex] = None,
                   directions: str = "both") -> FusionModel:
    """
    Оставляет обученные (W, b), только если по MRR на split они не хуже каждой
    из компонент; иначе W становится базисным вектором лучшей компоненты.

    Args:
        model: Обученное слияние
        split: Триплеты, на которых обучалось слияние
        filter_index: Известные триплеты клиента
        directions: Направления запросов

    Returns:
        model с выбранными (W, b)
    """
    if len(split) == 0:
        return model

    candidates = {
        "learned": (model.weight.copy(), model.bias),
        "single": (np.array([1.0, 0.0]), 0.0),
        "fed": (np.array([0.0, 1.0]), 0.0),
    }
    scores = {}
    for name, (weight, bias) in candidates.items():
        model.weight, model.bias = weight, bias
        scores[name] = evaluate(model, split, filter_index, directions).mrr

    chosen = max(candidates, key=lambda name: scores[name])
    model.weight, model.bias = candidates[chosen]
    if chosen != "learned":
        logger.info(f"Слияние уступает компоненте {chosen} (MRR {scores['learned']:.4f} < {scores[chosen]:.4f}), "
                    f"W={model.weight.tolist()}")
    return model
