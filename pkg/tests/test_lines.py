import io

import numpy as np
import pytest
import scipy.stats

from porcupine.errors import (
    DimensionMismatchError,
    DuplicateLineError,
    InfeasibleWeightsError,
    ParameterOutOfRangeError,
    TooManyCollisionsError,
    ValidationError,
    ZeroVectorError,
)
from porcupine.lines import (
    LineSet,
    NeuronLineMap,
    PNNWeights,
    RegionSignature,
    build_line_set,
    canonicalize_vector,
    cross_gram,
    decompose_weights,
    random_line_set,
    read_line_set,
    write_line_set,
)
from porcupine.types import LineSummary


@pytest.mark.parametrize(
    ('vector', 'expected', 'flag'),
    [
        ([1.0, -2.0, 0.0], [-1.0, 2.0, 0.0], -1),
        ([0.0, 3.0, 4.0], [0.0, 0.6, 0.8], 1),
        ([-5.0], [1.0], -1),
        ([-1.0, 2.0, 0.0, 3.0, 0.0], [-1.0, 2.0, 0.0, 3.0, 0.0], 1),
        ([-1.0, 2.0, 0.0, 0.0, -3.0], [1.0, -2.0, 0.0, 0.0, 3.0], -1),
    ],
)
def test_canonicalize_vector(vector: list, expected: list, flag: int) -> None:
    """
    Arrange: Ненулевой вектор
    Act: Вызов функции `canonicalize_vector`
    Assert: Единичный вектор с положительным последним ненулевым элементом и флаг ориентации
    """
    unit, orientation = canonicalize_vector(vector)

    assert np.allclose(unit, np.asarray(expected) / np.linalg.norm(expected))  # nosec
    assert orientation == flag  # nosec


def test_canonicalize_zero_vector() -> None:
    """
    Arrange: Нулевой вектор
    Act: Вызов функции `canonicalize_vector`
    Assert: Исключение ZeroVectorError
    """
    with pytest.raises(ZeroVectorError):
        canonicalize_vector([0.0, 0.0])


def test_build_line_set_rejects_collinear(plane_axes: LineSet) -> None:
    """
    Arrange: Два противоположно направленных вектора
    Act: Вызов функции `build_line_set` и добавление существующей прямой
    Assert: Исключение DuplicateLineError в обоих случаях
    """
    with pytest.raises(DuplicateLineError):
        build_line_set([[1.0, 0.0], [-2.0, 0.0]])

    with pytest.raises(DuplicateLineError):
        plane_axes.with_line([0.0, -3.0])


def test_random_line_set_invariants() -> None:
    """
    Arrange: Случайный набор из 7 прямых в R^5
    Act: Вычисление матриц Грама и углов
    Assert: Единичные столбцы, единичная диагональ, симметрия, углы в [0, pi] и нулевая диагональ углов
    """
    line_set = random_line_set(5, 7, seed=3)

    assert np.allclose(np.linalg.norm(line_set.unit_vectors, axis=0), 1.0, atol=1e-12)  # nosec
    assert np.array_equal(np.diag(line_set.gram), np.ones(7))  # nosec
    assert np.array_equal(line_set.gram, line_set.gram.T)  # nosec
    assert np.all(line_set.angle_matrix >= 0) and np.all(line_set.angle_matrix <= np.pi)  # nosec
    assert np.array_equal(np.diag(line_set.angle_matrix), np.zeros(7))  # nosec


def test_random_line_set_is_deterministic() -> None:
    """
    Arrange: Один и тот же seed
    Act: Два вызова функции `random_line_set`
    Assert: Одинаковые наборы прямых
    """
    assert random_line_set(6, 9, seed=5).same_as(random_line_set(6, 9, seed=5))  # nosec


def test_random_line_set_uniform_directions() -> None:
    """
    Arrange: 2000 случайных прямых в R^3
    Act: Критерий Колмогорова-Смирнова для последней координаты канонических векторов
    Assert: Для равномерного распределения на сфере |u_3| распределена равномерно на [0, 1]
    """
    line_set = random_line_set(3, 2000, seed=17)

    statistic = scipy.stats.kstest(line_set.unit_vectors[2], 'uniform')

    assert statistic.pvalue > 1e-3  # nosec


def test_random_line_set_collisions() -> None:
    """
    Arrange: Две прямые на вещественной оси всегда совпадают
    Act: Вызов функции `random_line_set`
    Assert: Исключение TooManyCollisionsError
    """
    with pytest.raises(TooManyCollisionsError):
        random_line_set(1, 2, seed=0, max_redraws=3)


def test_cross_gram_dimension_mismatch() -> None:
    """
    Arrange: Наборы прямых в R^2 и R^3
    Act: Вызов функции `cross_gram`
    Assert: Исключение DimensionMismatchError
    """
    with pytest.raises(DimensionMismatchError):
        cross_gram(random_line_set(2, 2, seed=1), random_line_set(3, 2, seed=1))


def test_neuron_line_map_constructors() -> None:
    """
    Arrange: Блочное и циклическое отображения
    Act: Построение отображений и несюръективного отображения
    Assert: Ожидаемые назначения и исключение ParameterOutOfRangeError для пустой прямой
    """
    assert NeuronLineMap.blocks(3, 2).assignment == (0, 0, 1, 1, 2, 2)  # nosec
    assert NeuronLineMap.round_robin(5, 2).assignment == (0, 1, 0, 1, 0)  # nosec
    assert NeuronLineMap.blocks(3, 2).members(1) == (2, 3)  # nosec

    with pytest.raises(ParameterOutOfRangeError):
        NeuronLineMap(assignment=(0, 0), num_lines=2)


def test_region_signature_summaries() -> None:
    """
    Arrange: Длины нейронов на трех прямых по два нейрона и прямая с нулевым нейроном
    Act: Построение сигнатуры
    Assert: Сводки MIXED, ALL_PLUS, ALL_MINUS; нулевой нейрон не влияет на сводку
    """
    signature = RegionSignature.from_signed_magnitudes(np.array([1, -1, 2, 3, -1, -2]), NeuronLineMap.blocks(3, 2))
    with_zero = RegionSignature.from_signed_magnitudes(np.array([0.0, -1.0]), NeuronLineMap.blocks(1, 2))

    assert signature.summaries == (LineSummary.MIXED, LineSummary.ALL_PLUS, LineSummary.ALL_MINUS)  # nosec
    assert signature.mixed_count == 1  # nosec
    assert with_zero.summaries == (LineSummary.ALL_MINUS,)  # nosec
    assert with_zero.zero_flags == ((True, False),)  # nosec


def test_decompose_weights(plane_axes: LineSet) -> None:
    """
    Arrange: Веса на осях плоскости по два нейрона на ось
    Act: Вызов функции `decompose_weights`
    Assert: Массы прямых равны суммам модулей длин, сигнатура соответствует знакам
    """
    weights = PNNWeights.from_magnitudes([1.0, -2.0, 3.0, 0.5], plane_axes, NeuronLineMap.blocks(2, 2))

    q, signature = decompose_weights(weights)

    assert np.allclose(q, [3.0, 3.5])  # nosec
    assert np.allclose(weights.total, [-1.0, 3.5])  # nosec
    assert signature.summaries == (LineSummary.MIXED, LineSummary.ALL_PLUS)  # nosec


def test_decompose_infeasible_weights(plane_axes: LineSet) -> None:
    """
    Arrange: Столбец весов, не лежащий на своей оси
    Act: Вызов функции `decompose_weights`
    Assert: Исключение InfeasibleWeightsError
    """
    weights = PNNWeights(matrix=np.array([[1.0, 0.0], [0.1, 1.0]]), line_set=plane_axes, line_map=NeuronLineMap.blocks(2, 1))

    with pytest.raises(InfeasibleWeightsError):
        decompose_weights(weights)


def test_from_unconstrained_groups_collinear_columns() -> None:
    """
    Arrange: Полносвязная сеть с двумя коллинеарными столбцами
    Act: Вызов метода `PNNWeights.from_unconstrained`
    Assert: Коллинеарные столбцы делят одну прямую, веса допустимы
    """
    weights = PNNWeights.from_unconstrained(np.array([[1.0, -2.0, 0.0], [0.0, 0.0, 1.0]]))

    assert weights.line_set.size == 2  # nosec
    assert weights.line_map.assignment == (0, 0, 1)  # nosec
    assert np.allclose(decompose_weights(weights)[0], [3.0, 1.0])  # nosec


def test_line_set_csv() -> None:
    """
    Arrange: Случайный набор прямых
    Act: Запись в CSV и чтение обратно
    Assert: Векторы восстановлены без потери точности
    """
    line_set = random_line_set(4, 6, seed=8)
    stream = io.StringIO()

    write_line_set(line_set, stream)
    stream.seek(0)
    restored = read_line_set(stream)

    assert stream.getvalue().splitlines()[0] == '4,6'  # nosec
    assert np.array_equal(restored.unit_vectors, line_set.unit_vectors)  # nosec


def test_read_line_set_rejects_wrong_body() -> None:
    """
    Arrange: CSV, заголовок которого объявляет больше прямых, чем есть
    Act: Вызов функции `read_line_set`
    Assert: Исключение DimensionMismatchError
    """
    with pytest.raises(DimensionMismatchError):
        read_line_set(io.StringIO('2,2\n1,0\n'))


def test_read_line_set_canonicalizes_rows() -> None:
    """
    Arrange: CSV со строками не единичной длины и с отрицательной ориентацией
    Act: Вызов функции `read_line_set`
    Assert: Строки нормированы и приведены к канонической ориентации
    """
    restored = read_line_set(io.StringIO('2,2\n0,2\n-3,0\n'))

    assert np.allclose(restored.unit_vectors, [[0.0, 1.0], [1.0, 0.0]])  # nosec


def test_read_line_set_rejects_zero_row() -> None:
    """
    Arrange: CSV с нулевой строкой
    Act: Вызов функции `read_line_set`
    Assert: Исключение ZeroVectorError
    """
    with pytest.raises(ZeroVectorError):
        read_line_set(io.StringIO('2,2\n1,0\n0,0\n'))


def test_line_set_rejects_non_unit_columns() -> None:
    """
    Arrange: Матрица со столбцом длины 2
    Act: Вызов метода `LineSet.from_unit_vectors`
    Assert: Исключение ValidationError, но не ZeroVectorError
    """
    with pytest.raises(ValidationError) as error:
        LineSet.from_unit_vectors(np.array([[2.0, 0.0], [0.0, 1.0]]))

    assert not isinstance(error.value, ZeroVectorError)  # nosec
