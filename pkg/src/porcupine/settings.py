import zlib
from os import environ
from typing import Union

import numpy as np

SeedKey = Union[int, str]


class Tolerances:
    """Числовые допуски, общие для всех модулей."""

    ZERO = 1e-12
    UNIT_NORM = 1e-12
    COLLINEARITY = 1e-9
    FEASIBILITY = 1e-9
    GRAM_PSD = 1e-10
    KERNEL_PSD = 1e-9
    CLAMP = 1e-9
    SYMMETRY = 1e-9
    PD = 1e-10
    PINV_RCOND = 1e-10
    LINE_DEVIATION = 1e-6


class Defaults:
    """Параметры запуска по умолчанию. Часть из них переопределяется переменными окружения."""

    SEED = int(environ.get('PORCUPINE_SEED', '0'))
    MC_SAMPLES = int(environ.get('PORCUPINE_MC_SAMPLES', '2000000'))
    MC_CHUNK = int(environ.get('PORCUPINE_MC_CHUNK', '200000'))
    THREADS = int(environ.get('PORCUPINE_THREADS', '1'))
    MAX_REDRAWS = 100
    MAX_CANDIDATES = 10_000
    CANDIDATE_BUDGET = 5_000_000
    SAMPLE_BATCH = 1024
    COVERAGE_SAMPLES = 100_000
    NET_SHRINK = 0.8
    NET_MAX_DIM = 6


def _key_to_int(key: SeedKey) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    return int(key) % (1 << 64)


def derive_seed(master: int, *keys: SeedKey) -> int:
    """
    Детерминированно выводит независимый seed из главного seed и набора ключей.
    :param master: главный seed запуска
    :param keys: ключи потока (имя эксперимента, номер испытания и т.п.)
    :return: 32-битный seed
    """
    entropy = [_key_to_int(master), *(_key_to_int(key) for key in keys)]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def make_rng(master: int, *keys: SeedKey) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
