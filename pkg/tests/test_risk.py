from typing import Tuple

import numpy as np
import pytest

from porcupine.errors import ConfigMismatchError, DimensionMismatchError, ParameterOutOfRangeError, ZeroVectorError
from porcupine.lines import LineSet, NeuronLineMap, PNNWeights, axis_line_set, random_line_set, scalar_weights
from porcupine.risk import (
    degree_one_risk,
    gaussian_relu_mean,
    matched_risk,
    mismatched_risk,
    monte_carlo_mean,
    monte_carlo_risk,
    network_output,
    scalar_risk,
    truncated_covariance,
)
from tests.conftest import WeightsFactory


def test_network_output() -> None:
    """
    Arrange: Сеть из двух противоположных нейронов на первой оси
    Act: Вызов функции `network_output` для одного входа и для пакета
    Assert: relu(1) + relu(-1) = 1 и выход пакета поэлементно
    """
    weights = np.array([[1.0, -1.0], [0.0, 0.0]])

    assert network_output([1.0, 0.0], weights) == 1.0  # nosec
    assert np.allclose(network_output(np.array([[2.0, 5.0], [-3.0, 1.0]]), weights), [2.0, 3.0])  # nosec

    with pytest.raises(DimensionMismatchError):
        network_output([1.0, 0.0, 0.0], weights)


def test_gaussian_relu_mean() -> None:
    """
    Arrange: Вектор (3, 4)
    Act: Вызов функции `gaussian_relu_mean`
    Assert: E[relu(w^T x)] = 5 / sqrt(2 pi)
    """
    assert gaussian_relu_mean([3.0, 4.0]) == pytest.approx(5.0 / np.sqrt(2.0 * np.pi))  # nosec


def test_scalar_risk_matches_matched_risk(rng: np.random.Generator) -> None:
    """
    Arrange: 20 случайных пар скалярных сетей из четырех нейронов
    Act: Скалярная формула риска и общая формула согласованной PNN
    Assert: Значения совпадают до 1e-12
    """
    for _ in range(20):
        w, w_star = rng.standard_normal(4), rng.standard_normal(4)

        scalar = scalar_risk(w, w_star)
        general = matched_risk(scalar_weights(w), scalar_weights(w_star))

        assert abs(scalar.total - general.total) < 1e-12  # nosec
        assert abs(scalar.linear_term - general.linear_term) < 1e-12  # nosec


@pytest.mark.parametrize('d', [2, 3, 6])
def test_degree_one_risk_matches_matched_risk(d: int, rng: np.random.Generator) -> None:
    """
    Arrange: Веса PNN степени один с двумя нейронами на оси
    Act: Формула для осей и общая формула согласованной PNN
    Assert: Значения совпадают до 1e-12
    """
    axes = axis_line_set(d)
    line_map = NeuronLineMap.blocks(d, 2)
    weights = PNNWeights.from_magnitudes(rng.standard_normal(2 * d), axes, line_map)
    weights_star = PNNWeights.from_magnitudes(rng.standard_normal(2 * d), axes, line_map)

    special = degree_one_risk(weights.matrix, weights_star.matrix, line_map)
    general = matched_risk(weights, weights_star)

    assert abs(special.total - general.total) < 1e-12  # nosec


def test_matched_risk_zero_at_truth(random_lines: LineSet, weights_factory: WeightsFactory) -> None:
    """
    Arrange: Веса, совпадающие с порождающими
    Act: Вызов функций `matched_risk` и `mismatched_risk`
    Assert: Риск равен нулю
    """
    weights = weights_factory(random_lines, 6, 1)

    assert matched_risk(weights, weights).reported_total == pytest.approx(0.0, abs=1e-12)  # nosec
    assert mismatched_risk(weights, weights).reported_total == pytest.approx(0.0, abs=1e-12)  # nosec


def test_matched_risk_config_mismatch(random_lines: LineSet, weights_factory: WeightsFactory) -> None:
    """
    Arrange: Сети на одних прямых, но с разными отображениями нейронов
    Act: Вызов функции `matched_risk`
    Assert: Исключение ConfigMismatchError
    """
    with pytest.raises(ConfigMismatchError):
        matched_risk(weights_factory(random_lines, 6, 1), weights_factory(random_lines, 3, 2))


def test_mismatched_risk_reduces_to_matched(random_lines: LineSet, weights_factory: WeightsFactory) -> None:
    """
    Arrange: Согласованная конфигурация
    Act: Вызов функций `mismatched_risk` и `matched_risk`
    Assert: Значения совпадают
    """
    weights, weights_star = weights_factory(random_lines, 6, 1), weights_factory(random_lines, 6, 2)

    assert mismatched_risk(weights, weights_star).total == pytest.approx(  # nosec
        matched_risk(weights, weights_star).total,
        abs=1e-12,
    )


def test_risk_of_zero_network_dominates_masses() -> None:
    """
    Arrange: 50 случайных порождающих сетей в R^d, d от 50 до 69, и нулевые обучаемые сети
    Act: Вызов функции `mismatched_risk`
    Assert: Риск не меньше (1/4)||q*||^2 в каждом случае
    """
    for instance in range(50):
        rng = np.random.default_rng(instance)
        d = 50 + instance % 20
        r_star = 1 + instance % 12
        lines_star = random_line_set(d, r_star, seed=100 + instance)
        weights_star = PNNWeights.from_magnitudes(
            rng.standard_normal(2 * r_star),
            lines_star,
            NeuronLineMap.blocks(r_star, 2),
        )
        r = 1 + instance % 6
        zero = PNNWeights.from_magnitudes(np.zeros(r), random_line_set(d, r, seed=200 + instance), NeuronLineMap.blocks(r, 1))
        q_star = np.bincount(weights_star.line_map.indices, weights=weights_star.column_norms)

        assert mismatched_risk(zero, weights_star).total >= 0.25 * float(q_star @ q_star) - 1e-9  # nosec


def test_monte_carlo_mean_is_deterministic() -> None:
    """
    Arrange: Интеграл E[||x||^2] = d по нескольким порциям
    Act: Вызовы функции `monte_carlo_mean` в одном и в двух потоках
    Assert: Одинаковые результаты, оценка близка к d
    """

    def squared_norm(x: np.ndarray) -> np.ndarray:
        return np.sum(x**2, axis=1)

    single = monte_carlo_mean(squared_norm, 3, 40_000, seed=7, chunk_size=10_000, threads=1)
    threaded = monte_carlo_mean(squared_norm, 3, 40_000, seed=7, chunk_size=10_000, threads=2)

    assert np.array_equal(single[0], threaded[0]) and np.array_equal(single[1], threaded[1])  # nosec
    assert abs(single[0][0] - 3.0) < 5 * single[1][0]  # nosec


def test_monte_carlo_mean_rejects_empty() -> None:
    """
    Arrange: Нулевое число выборок
    Act: Вызов функции `monte_carlo_mean`
    Assert: Исключение ParameterOutOfRangeError
    """
    with pytest.raises(ParameterOutOfRangeError):
        monte_carlo_mean(lambda x: x[:, 0], 2, 0, seed=0)


@pytest.mark.slow
@pytest.mark.parametrize('mismatched', [False, True])
@pytest.mark.parametrize('instance', range(20))
def test_closed_form_matches_monte_carlo(instance: int, mismatched: bool, weights_factory: WeightsFactory) -> None:
    """
    Arrange: Случайная пара сетей с гауссовскими длинами: d до 8, r до 6, k до 12, r* до 5
    Act: Риск в замкнутой форме и оценка Монте-Карло по 2*10^6 выборкам
    Assert: Расхождение не больше четырех стандартных ошибок
    """
    d = 2 + instance % 7
    lines = random_line_set(d, 2 + instance % 5, seed=100 + instance)
    weights = weights_factory(lines, 2 * lines.size, 300 + instance)
    if mismatched:
        lines_star = random_line_set(d, 1 + instance % 5, seed=200 + instance)
        truth = weights_factory(lines_star, 2 * lines_star.size, 500 + instance)
        closed = mismatched_risk(weights, truth).total
    else:
        truth = weights_factory(lines, 2 * lines.size, 400 + instance)
        closed = matched_risk(weights, truth).total

    estimate, stderr = monte_carlo_risk(weights, truth, n_samples=2_000_000, seed=instance)

    assert abs(closed - estimate) <= 4 * stderr  # nosec


def test_truncated_covariance_special_angles() -> None:
    """
    Arrange: Совпадающие и противоположные векторы
    Act: Вызов функции `truncated_covariance`
    Assert: I/2 для совпадающих, нулевая матрица для противоположных
    """
    w = np.array([1.0, 2.0, -2.0])

    assert np.allclose(truncated_covariance(w, 3 * w), np.eye(3) / 2, atol=1e-12)  # nosec
    assert np.allclose(truncated_covariance(w, -w), np.zeros((3, 3)), atol=1e-12)  # nosec

    with pytest.raises(ZeroVectorError):
        truncated_covariance(w, np.zeros(3))


def _covariance_pair(pair: int) -> Tuple[np.ndarray, np.ndarray]:
    """Случайная пара в R^3; первые две пары почти параллельны (угол меньше 1e-3)."""
    rng = np.random.default_rng(40 + pair)
    w1 = rng.standard_normal(3)
    if pair < 2:
        unit = w1 / np.linalg.norm(w1)
        normal = rng.standard_normal(3)
        normal -= (normal @ unit) * unit
        angle = (5e-4, 1e-4)[pair]
        return w1, 1.7 * (np.cos(angle) * unit + np.sin(angle) * normal / np.linalg.norm(normal))
    return w1, rng.standard_normal(3)


@pytest.mark.slow
@pytest.mark.parametrize('pair', range(10))
def test_truncated_covariance_matches_monte_carlo(pair: int) -> None:
    """
    Arrange: Случайная пара векторов в R^3, включая почти параллельные
    Act: Замкнутая форма и оценка Монте-Карло по 10^7 выборкам
    Assert: Каждый элемент в пределах четырех стандартных ошибок
    """
    w1, w2 = _covariance_pair(pair)

    def integrand(x: np.ndarray) -> np.ndarray:
        mask = ((x @ w1) > 0) & ((x @ w2) > 0)
        return (mask[:, None, None] * x[:, :, None] * x[:, None, :]).reshape(x.shape[0], 9)

    mean, stderr = monte_carlo_mean(integrand, 3, 10_000_000, seed=31 + pair)

    assert np.all(np.abs(truncated_covariance(w1, w2).ravel() - mean) <= 4 * stderr + 1e-12)  # nosec
