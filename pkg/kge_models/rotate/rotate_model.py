"""
RotatE: f_r(h, t) = -Σ_i |h_i r_i - t_i|, r_i = exp(iθ_i).

Отношение хранится как d/2 фаз, поэтому |r_i| = 1 выполняется тождественно.
Сущности - чередующиеся вещественные/мнимые части.
"""

from typing import Tuple

import numpy as np

from ..base import BaseKGEModel, ModelKind, join_complex, split_complex
from utils.errors import ContractViolation


class RotatEModel(BaseKGEModel):
    """Отношение - поворот в комплексной плоскости."""

    kind = ModelKind.ROTATE
    is_distance = True

    def relation_dim(self, dim: int) -> int:
        return dim // 2

    def check_dim(self, dim: int) -> None:
        if dim <= 0 or dim % 2:
            raise ContractViolation(f"RotatE: размерность должна быть чётной, получено {dim}")

    def init_relations(self, num: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, 2.0 * np.pi, size=(num, self.relation_dim(dim)))

    @staticmethod
    def _rotate(h: np.ndarray, phase: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        h_re, h_im = split_complex(h)
        cos, sin = np.cos(phase), np.sin(phase)
        return h_re * cos - h_im * sin, h_re * sin + h_im * cos

    def _score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        hr_re, hr_im = self._rotate(h, r)
        t_re, t_im = split_complex(t)
        d_re, d_im = hr_re - t_re, hr_im - t_im
        return -np.sqrt(d_re * d_re + d_im * d_im).sum(axis=-1)

    def _score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cos, sin = np.cos(r), np.sin(r)
        h_re, h_im = split_complex(h)
        t_re, t_im = split_complex(t)
        hr_re = h_re * cos - h_im * sin
        hr_im = h_re * sin + h_im * cos
        d_re, d_im = hr_re - t_re, hr_im - t_im

        modulus = np.sqrt(d_re * d_re + d_im * d_im)
        f = -modulus.sum(axis=-1)

        # df/d(diff) = -diff / |diff|, ноль при |diff| = 0
        safe = np.where(modulus > 0, modulus, 1.0)
        g_re = np.where(modulus > 0, -d_re / safe, 0.0)
        g_im = np.where(modulus > 0, -d_im / safe, 0.0)

        gh = join_complex(g_re * cos + g_im * sin, g_im * cos - g_re * sin)
        gr = g_im * hr_re - g_re * hr_im
        gt = join_complex(-g_re, -g_im)
        return f, gh, gr, gt
