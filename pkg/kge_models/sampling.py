"""
Генерация негативных триплетов заменой головы или хвоста.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from utils.errors import ContractViolation
from utils.kg_data import TripleStore

logger = logging.getLogger(__name__)

# Сколько раз перевыбирать негативы, совпадающие с известными триплетами
STRICT_MAX_ATTEMPTS = 100


@dataclass
class NegativeBatch:
    """
    Негативы для батча позитивов.

    entities: (B, n_neg) - подставляемые сущности
    tail_side: (B,) - True, если заменяется хвост, иначе голова
    """
    entities: np.ndarray
    tail_side: np.ndarray

    def __len__(self) -> int:
        return len(self.entities)

    @property
    def n_neg(self) -> int:
        return self.entities.shape[1]

    def expand(self, positives: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Головы, отношения и хвосты негативов, каждая формы (B, n_neg)."""
        heads = np.where(self.tail_side[:, None], positives[:, 0:1], self.entities)
        tails = np.where(self.tail_side[:, None], self.entities, positives[:, 2:3])
        relations = np.broadcast_to(positives[:, 1:2], self.entities.shape)
        return heads, relations, tails


def corruption_sides(batch_size: int, corruption: str = "both") -> np.ndarray:
    """Сторона замены по позиции в батче: чётные - хвост, нечётные - голова."""
    if corruption == "tail":
        return np.ones(batch_size, dtype=bool)
    return np.arange(batch_size) % 2 == 0


def _known_mask(positives: np.ndarray, candidates: np.ndarray, tail_side: np.ndarray,
                known: TripleStore) -> np.ndarray:
    mask = np.zeros(candidates.shape, dtype=bool)
    for b, (h, r, t) in enumerate(positives.tolist()):
        pool = known.known_tails(h, r) if tail_side[b] else known.known_heads(t, r)
        if len(pool) > 1:
            mask[b] = np.isin(candidates[b], list(pool))
    return mask


def _resample(candidates: np.ndarray, bad: np.ndarray, num_entities: int, rng: np.random.Generator) -> None:
    candidates[bad] = rng.integers(0, num_entities, size=int(bad.sum()))


def _exclude_original(candidates: np.ndarray, original: np.ndarray, num_entities: int,
                      rng: np.random.Generator) -> None:
    bad = candidates == original
    while bad.any():
        _resample(candidates, bad, num_entities, rng)
        bad = candidates == original


def _sample(positives: np.ndarray, tail_side: np.ndarray, num_entities: int, n_neg: int,
            rng: np.random.Generator, known: Optional[TripleStore]) -> NegativeBatch:
    if num_entities < 2:
        raise ContractViolation("Для негативов нужно не меньше двух сущностей")

    original = np.where(tail_side, positives[:, 2], positives[:, 0])[:, None]
    candidates = rng.integers(0, num_entities, size=(len(positives), n_neg))
    _exclude_original(candidates, original, num_entities, rng)

    if known is not None:
        for _ in range(STRICT_MAX_ATTEMPTS):
            bad = _known_mask(positives, candidates, tail_side, known)
            if not bad.any():
                break
            _resample(candidates, bad, num_entities, rng)
            _exclude_original(candidates, original, num_entities, rng)
        else:
            logger.warning("Строгая фильтрация негативов не сошлась, часть негативов может быть истинной")

    return NegativeBatch(candidates, tail_side)


def sample_negative_batch(positives: np.ndarray, num_entities: int, n_neg: int,
                          rng: np.random.Generator, corruption: str = "both",
                          known: Optional[TripleStore] = None) -> NegativeBatch:
    """
    Равномерно выбирает n_neg сущностей для каждого позитива батча.
    Совпадения с исходной сущностью перевыбираются; полный граф проверяется
    только в строгом режиме (передан known).

    Args:
        positives: Позитивные триплеты (B, 3)
        num_entities: Размер словаря сущностей
        n_neg: Число негативов на позитив
        rng: Генератор случайных чисел
        corruption: 'both' (чередование по позиции) или 'tail'
        known: Известные триплеты для строгого режима

    Returns:
        NegativeBatch
    """
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    return _sample(positives, corruption_sides(len(positives), corruption), num_entities, n_neg, rng, known)


def sample_negatives(positive: Tuple[int, int, int], num_entities: int, n_neg: int,
                     rng: np.random.Generator, side: str = "tail",
                     known: Optional[TripleStore] = None) -> NegativeBatch:
    """Негативы для одного позитива с заданной стороной замены ('tail' или 'head')."""
    if side not in ("tail", "head"):
        raise ContractViolation(f"Неизвестная сторона замены: {side}")
    positives = np.asarray([positive], dtype=np.int64)
    return _sample(positives, np.array([side == "tail"]), num_entities, n_neg, rng, known)
