from typing import Callable

import numpy as np
import pytest

from porcupine.lines import LineSet, NeuronLineMap, PNNWeights, axis_line_set, build_line_set, random_line_set

WeightsFactory = Callable[[LineSet, int, int], PNNWeights]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def plane_axes() -> LineSet:
    return axis_line_set(2)


@pytest.fixture
def random_lines() -> LineSet:
    return random_line_set(4, 3, seed=11)


@pytest.fixture
def random_lines_star() -> LineSet:
    return random_line_set(4, 2, seed=12)


@pytest.fixture
def weights_factory() -> WeightsFactory:
    """Веса с гауссовскими длинами, k нейронов распределены по прямым по кругу."""

    def build(line_set: LineSet, k: int, seed: int) -> PNNWeights:
        line_map = NeuronLineMap.round_robin(k, line_set.size)
        magnitudes = np.random.default_rng(seed).standard_normal(k)
        return PNNWeights.from_magnitudes(magnitudes, line_set, line_map)

    return build


def clustered_lines(epsilon: float) -> LineSet:
    """Три прямые вокруг каждой из осей e1, ..., e4 в R^6 на угловом расстоянии epsilon."""
    vectors = []
    for axis in range(4):
        for phi in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
            vector = np.zeros(6)
            vector[axis] = np.cos(epsilon)
            vector[4], vector[5] = np.sin(epsilon) * np.cos(phi), np.sin(epsilon) * np.sin(phi)
            vectors.append(vector)
    return build_line_set(vectors)


def balanced_pairs(line_set: LineSet, masses: np.ndarray) -> PNNWeights:
    """Пара нейронов +m/2 и -m/2 на каждой прямой: массы прямых равны masses, сумма весов равна нулю."""
    magnitudes = np.column_stack([masses / 2, -masses / 2]).ravel()
    return PNNWeights.from_magnitudes(magnitudes, line_set, NeuronLineMap.blocks(line_set.size, 2))
