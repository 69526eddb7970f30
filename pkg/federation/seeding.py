"""
Независимые потоки случайных чисел эксперимента.

Каждый поток задаётся кортежем (seed, stream, scope...). Инициализация
сущностей клиента c в локальном обучении использует scope=c, сервер - scope=0,
поэтому один клиент в федерации стартует с тех же эмбеддингов, что и без неё.
"""

import numpy as np

ENTITY_STREAM = 0
TRAIN_STREAM = 1
SERVER_STREAM = 2
RELATION_STREAM = 3
FUSION_STREAM = 4


def make_rng(seed: int, stream: int, *scope: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, *scope])


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state
