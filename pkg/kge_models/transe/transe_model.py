"""
TransE: f_r(h, t) = -||h + r - t||_p, p ∈ {1, 2}.
"""

from typing import Tuple

import numpy as np

from ..base import BaseKGEModel, ModelKind
from utils.errors import ConfigurationError


class TransEModel(BaseKGEModel):
    """Трансляционная модель, отношение - сдвиг в пространстве сущностей."""

    kind = ModelKind.TRANSE
    is_distance = True

    def __init__(self, p_norm: int = 2):
        if p_norm not in (1, 2):
            raise ConfigurationError(f"TransE поддерживает только p=1 или p=2, получено {p_norm}")
        self.p_norm = p_norm

    def _score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        diff = h + r - t
        if self.p_norm == 1:
            return -np.abs(diff).sum(axis=-1)
        return -np.sqrt((diff * diff).sum(axis=-1))

    def _score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        diff = h + r - t
        if self.p_norm == 1:
            f = -np.abs(diff).sum(axis=-1)
            # субградиент 0 в нулевой координате
            g = -np.sign(diff)
        else:
            norm = np.sqrt((diff * diff).sum(axis=-1))
            f = -norm
            safe = np.where(norm > 0, norm, 1.0)
            g = np.where(norm[..., None] > 0, -diff / safe[..., None], 0.0)
        return f, g, g, -g

    def __repr__(self) -> str:
        return f"TransEModel(p_norm={self.p_norm})"
