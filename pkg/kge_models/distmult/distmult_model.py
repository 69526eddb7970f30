"""
DistMult: f_r(h, t) = h^T diag(r) t.
"""

from typing import Tuple

import numpy as np

from ..base import BaseKGEModel, ModelKind


class DistMultModel(BaseKGEModel):
    """Билинейная диагональная модель, симметрична по h и t."""

    kind = ModelKind.DISTMULT

    def _score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        return (h * r * t).sum(axis=-1)

    def _score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (h * r * t).sum(axis=-1), r * t, h * t, h * r
