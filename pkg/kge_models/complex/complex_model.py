"""
ComplEx: f_r(h, t) = Re(h^T diag(r) conj(t)).

Строка из d вещественных чисел - это d/2 комплексных чисел,
вещественная и мнимая части чередуются.
"""

from typing import Tuple

import numpy as np

from ..base import BaseKGEModel, ModelKind, join_complex, split_complex
from utils.errors import ContractViolation


class ComplExModel(BaseKGEModel):
    """Комплексное расширение DistMult."""

    kind = ModelKind.COMPLEX

    def check_dim(self, dim: int) -> None:
        if dim <= 0 or dim % 2:
            raise ContractViolation(f"ComplEx: размерность должна быть чётной, получено {dim}")

    def _score(self, h: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
        h_re, h_im = split_complex(h)
        r_re, r_im = split_complex(r)
        t_re, t_im = split_complex(t)
        hr_re = h_re * r_re - h_im * r_im
        hr_im = h_re * r_im + h_im * r_re
        return (hr_re * t_re + hr_im * t_im).sum(axis=-1)

    def _score_grad(self, h: np.ndarray, r: np.ndarray, t: np.ndarray
                    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        h_re, h_im = split_complex(h)
        r_re, r_im = split_complex(r)
        t_re, t_im = split_complex(t)
        hr_re = h_re * r_re - h_im * r_im
        hr_im = h_re * r_im + h_im * r_re
        f = (hr_re * t_re + hr_im * t_im).sum(axis=-1)

        gh = join_complex(r_re * t_re + r_im * t_im, r_re * t_im - r_im * t_re)
        gr = join_complex(h_re * t_re + h_im * t_im, h_re * t_im - h_im * t_re)
        gt = join_complex(hr_re, hr_im)
        return f, gh, gr, gt
