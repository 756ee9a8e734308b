import csv
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from porcupine.errors import (
    DimensionMismatchError,
    DuplicateLineError,
    InfeasibleWeightsError,
    ParameterOutOfRangeError,
    TooManyCollisionsError,
    ValidationError,
    ZeroVectorError,
)
from porcupine.settings import Defaults, Tolerances
from porcupine.types import LineSummary

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _orientation_flags(unit_columns: np.ndarray, *, zero_tol: float) -> np.ndarray:
    """
    Знак элемента с наибольшим индексом среди ненулевых, для каждого столбца.
    :param unit_columns: матрица d×m из единичных столбцов
    :param zero_tol: порог ненулевого элемента
    :return: вектор из ±1 длины m
    """
    mask = np.abs(unit_columns) > zero_tol
    last = unit_columns.shape[0] - 1 - np.argmax(mask[::-1], axis=0)
    values = unit_columns[last, np.arange(unit_columns.shape[1])]
    return np.where(values > 0, 1, -1)


def canonicalize_vector(v: ArrayLike, *, zero_tol: float = Tolerances.ZERO) -> Tuple[np.ndarray, int]:
    """
    Приводит вектор к каноническому единичному представителю его прямой.
    :param v: ненулевой вектор
    :param zero_tol: порог нулевой нормы и нулевого элемента
    :return: единичный вектор с положительным последним ненулевым элементом и флаг ориентации ±1
    """
    vector = np.asarray(v, dtype=float).ravel()
    norm = float(np.linalg.norm(vector))
    if not norm > zero_tol:
        msg = f'Vector norm {norm:.3e} is below zero tolerance {zero_tol:.1e}.'
        raise ZeroVectorError(msg)

    unit = vector / norm
    flag = int(_orientation_flags(unit[:, None], zero_tol=zero_tol)[0])
    return unit * flag, flag


@dataclass(frozen=True, eq=False)
class LineSet:
    """Набор прямых через начало координат, заданный каноническими единичными векторами (столбцами)."""

    unit_vectors: np.ndarray
    gram: np.ndarray
    angle_matrix: np.ndarray

    @classmethod
    def from_unit_vectors(
        cls,
        unit_vectors: np.ndarray,
        *,
        collinearity_tol: float = Tolerances.COLLINEARITY,
        unit_tol: float = Tolerances.UNIT_NORM,
        zero_tol: float = Tolerances.ZERO,
    ) -> 'LineSet':
        """
        Собирает набор из уже канонических столбцов и проверяет инварианты.
        :param unit_vectors: матрица d×r
        :param collinearity_tol: допуск коллинеарности различных прямых
        :param unit_tol: допуск единичной нормы
        :param zero_tol: порог ненулевого элемента для ориентации
        :return: набор прямых
        """
        matrix = np.array(unit_vectors, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
            msg = f'Expected a non-empty d×r matrix, got shape {matrix.shape}.'
            raise DimensionMismatchError(msg)

        norms = np.linalg.norm(matrix, axis=0)
        if np.any(np.abs(norms - 1.0) > unit_tol):
            msg = f'Columns must have unit norm, worst deviation {np.max(np.abs(norms - 1.0)):.3e}.'
            raise ValidationError(msg)

        if np.any(_orientation_flags(matrix, zero_tol=zero_tol) < 0):
            msg = 'Columns must be in canonical orientation.'
            raise ValidationError(msg)

        gram = np.clip(matrix.T @ matrix, -1.0, 1.0)
        gram = (gram + gram.T) / 2
        np.fill_diagonal(gram, 1.0)
        off_diagonal = np.abs(gram) - np.eye(gram.shape[0])
        if gram.shape[0] > 1 and np.max(off_diagonal) >= 1.0 - collinearity_tol:
            i, j = np.unravel_index(np.argmax(off_diagonal), off_diagonal.shape)
            msg = f'Lines {min(i, j)} and {max(i, j)} are collinear.'
            raise DuplicateLineError(msg)

        angles = np.arccos(gram)
        np.fill_diagonal(angles, 0.0)
        return cls(unit_vectors=_readonly(matrix), gram=_readonly(gram), angle_matrix=_readonly(angles))

    @property
    def dim(self) -> int:
        return int(self.unit_vectors.shape[0])

    @property
    def size(self) -> int:
        return int(self.unit_vectors.shape[1])

    def line(self, index: int) -> np.ndarray:
        return self.unit_vectors[:, index]

    def subset(self, indices: Sequence[int]) -> 'LineSet':
        return LineSet.from_unit_vectors(self.unit_vectors[:, list(indices)])

    def with_line(self, vector: ArrayLike) -> 'LineSet':
        """Новый набор с добавленной в конец прямой."""
        unit, _ = canonicalize_vector(vector)
        if unit.shape[0] != self.dim:
            msg = f'Line of dimension {unit.shape[0]} added to a set of dimension {self.dim}.'
            raise DimensionMismatchError(msg)
        return LineSet.from_unit_vectors(np.column_stack([self.unit_vectors, unit]))

    def same_as(self, other: 'LineSet') -> bool:
        return self is other or (
            self.unit_vectors.shape == other.unit_vectors.shape
            and bool(np.array_equal(self.unit_vectors, other.unit_vectors))
        )


def build_line_set(
    raw_vectors: Union[np.ndarray, Iterable[ArrayLike]],
    *,
    zero_tol: float = Tolerances.ZERO,
    collinearity_tol: float = Tolerances.COLLINEARITY,
) -> LineSet:
    """
    Строит набор прямых из произвольных ненулевых векторов.
    :param raw_vectors: последовательность d-векторов (или массив r×d)
    :param zero_tol: порог нулевого вектора
    :param collinearity_tol: допуск коллинеарности
    :return: набор прямых с каноническими столбцами
    """
    vectors = [np.asarray(vector, dtype=float).ravel() for vector in raw_vectors]
    if not vectors:
        msg = 'At least one vector is required.'
        raise ParameterOutOfRangeError(msg)

    dims = {vector.shape[0] for vector in vectors}
    if len(dims) != 1:
        msg = f'Vectors have different dimensions: {sorted(dims)}.'
        raise DimensionMismatchError(msg)

    columns = [canonicalize_vector(vector, zero_tol=zero_tol)[0] for vector in vectors]
    return LineSet.from_unit_vectors(np.column_stack(columns), collinearity_tol=collinearity_tol, zero_tol=zero_tol)


def axis_line_set(d: int) -> LineSet:
    """Прямые стандартных осей: набор PNN степени один."""
    return LineSet.from_unit_vectors(np.eye(d))


def cross_gram(a: LineSet, b: LineSet) -> np.ndarray:
    """
    Матрица скалярных произведений U_a^T U_b.
    :param a: первый набор прямых
    :param b: второй набор прямых
    :return: матрица r_a×r_b с элементами в [-1, 1]
    """
    if a.dim != b.dim:
        msg = f'Line sets live in different dimensions: {a.dim} and {b.dim}.'
        raise DimensionMismatchError(msg)
    return np.clip(a.unit_vectors.T @ b.unit_vectors, -1.0, 1.0)


def _collision_columns(unit_columns: np.ndarray, *, collinearity_tol: float) -> np.ndarray:
    overlap = np.triu(np.abs(unit_columns.T @ unit_columns), k=1)
    return np.flatnonzero(np.any(overlap >= 1.0 - collinearity_tol, axis=0))


def random_line_set(
    d: int,
    r: int,
    seed: int,
    *,
    collinearity_tol: float = Tolerances.COLLINEARITY,
    max_redraws: int = Defaults.MAX_REDRAWS,
) -> LineSet:
    """
    Случайные равномерно распределенные на сфере направления.
    :param d: размерность
    :param r: число прямых
    :param seed: seed генератора
    :param collinearity_tol: допуск коллинеарности
    :param max_redraws: число повторных розыгрышей для почти коллинеарных прямых
    :return: набор прямых
    """
    if d < 1 or r < 1:
        msg = f'Both d and r must be positive, got d={d}, r={r}.'
        raise ParameterOutOfRangeError(msg)

    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((d, r))
    for attempt in range(max_redraws + 1):
        units = raw / np.linalg.norm(raw, axis=0)
        colliding = _collision_columns(units, collinearity_tol=collinearity_tol)
        if colliding.size == 0:
            units = units * _orientation_flags(units, zero_tol=Tolerances.ZERO)
            return LineSet.from_unit_vectors(units, collinearity_tol=collinearity_tol)

        logger.debug('Redrawing %d colliding lines (attempt %d)', colliding.size, attempt + 1)
        raw[:, colliding] = rng.standard_normal((d, colliding.size))

    msg = f'Could not draw {r} non-collinear lines in dimension {d} after {max_redraws} redraws.'
    raise TooManyCollisionsError(msg)


@dataclass(frozen=True)
class NeuronLineMap:
    """Сюръективное отображение нейронов на прямые (индексы с нуля)."""

    assignment: Tuple[int, ...]
    num_lines: int

    def __post_init__(self) -> None:
        object.__setattr__(self, 'assignment', tuple(int(line) for line in self.assignment))
        if not self.assignment:
            msg = 'A network needs at least one neuron.'
            raise ParameterOutOfRangeError(msg)

        if min(self.assignment) < 0 or max(self.assignment) >= self.num_lines:
            msg = f'Line indices must lie in [0, {self.num_lines}).'
            raise ParameterOutOfRangeError(msg)

        empty = sorted(set(range(self.num_lines)) - set(self.assignment))
        if empty:
            msg = f'Every line needs at least one neuron, empty lines: {empty}.'
            raise ParameterOutOfRangeError(msg)

    @classmethod
    def blocks(cls, num_lines: int, per_line: int) -> 'NeuronLineMap':
        """Нейроны per_line*l, ..., per_line*l + per_line - 1 лежат на прямой l."""
        return cls(assignment=tuple(i // per_line for i in range(num_lines * per_line)), num_lines=num_lines)

    @classmethod
    def round_robin(cls, num_neurons: int, num_lines: int) -> 'NeuronLineMap':
        return cls(assignment=tuple(i % num_lines for i in range(num_neurons)), num_lines=num_lines)

    @property
    def num_neurons(self) -> int:
        return len(self.assignment)

    @property
    def indices(self) -> np.ndarray:
        return np.asarray(self.assignment, dtype=int)

    def members(self, line: int) -> Tuple[int, ...]:
        return tuple(i for i, assigned in enumerate(self.assignment) if assigned == line)


@dataclass(frozen=True)
class RegionSignature:
    """Знаки ориентации нейронов, сгруппированные по прямым."""

    signs: Tuple[Tuple[int, ...], ...]
    zero_flags: Tuple[Tuple[bool, ...], ...]

    @classmethod
    def from_signed_magnitudes(
        cls,
        magnitudes: np.ndarray,
        line_map: NeuronLineMap,
        *,
        zero_tol: float = Tolerances.ZERO,
    ) -> 'RegionSignature':
        """
        :param magnitudes: проекции столбцов на их прямые (k-вектор)
        :param line_map: отображение нейронов на прямые
        :param zero_tol: порог нулевого нейрона
        """
        signs: List[Tuple[int, ...]] = []
        zero_flags: List[Tuple[bool, ...]] = []
        for line in range(line_map.num_lines):
            members = line_map.members(line)
            signs.append(tuple(-1 if magnitudes[i] < -zero_tol else 1 for i in members))
            zero_flags.append(tuple(bool(abs(magnitudes[i]) <= zero_tol) for i in members))
        return cls(signs=tuple(signs), zero_flags=tuple(zero_flags))

    @classmethod
    def from_signs(cls, signs: Sequence[int], line_map: NeuronLineMap) -> 'RegionSignature':
        return cls.from_signed_magnitudes(np.asarray(signs, dtype=float), line_map)

    @property
    def num_lines(self) -> int:
        return len(self.signs)

    @property
    def summaries(self) -> Tuple[LineSummary, ...]:
        """Сводка по каждой прямой; нулевые нейроны в сводке не участвуют."""
        result = []
        for line_signs, line_zeros in zip(self.signs, self.zero_flags):
            present = {sign for sign, is_zero in zip(line_signs, line_zeros) if not is_zero}
            if present == {1, -1}:
                result.append(LineSummary.MIXED)
            elif present == {-1}:
                result.append(LineSummary.ALL_MINUS)
            else:
                result.append(LineSummary.ALL_PLUS)
        return tuple(result)

    @property
    def mixed_count(self) -> int:
        return sum(summary is LineSummary.MIXED for summary in self.summaries)

    def line_signs(self) -> np.ndarray:
        """Знак каждой прямой для областей, где все нейроны прямой одного знака."""
        return np.asarray([-1 if summary is LineSummary.ALL_MINUS else 1 for summary in self.summaries], dtype=float)


@dataclass(frozen=True, eq=False)
class PNNWeights:
    """Матрица весов d×k сети PNN вместе с ее набором прямых и отображением нейронов."""

    matrix: np.ndarray
    line_set: LineSet
    line_map: NeuronLineMap

    def __post_init__(self) -> None:
        matrix = _readonly(self.matrix)
        if matrix.ndim != 2:
            msg = f'Weights must be a d×k matrix, got shape {matrix.shape}.'
            raise DimensionMismatchError(msg)

        if matrix.shape[0] != self.line_set.dim:
            msg = f'Weights have {matrix.shape[0]} rows, lines live in dimension {self.line_set.dim}.'
            raise DimensionMismatchError(msg)

        if matrix.shape[1] != self.line_map.num_neurons or self.line_map.num_lines != self.line_set.size:
            msg = (
                f'Weights with {matrix.shape[1]} columns do not match a map of {self.line_map.num_neurons} '
                f'neurons onto {self.line_map.num_lines} lines (line set has {self.line_set.size}).'
            )
            raise DimensionMismatchError(msg)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def from_magnitudes(cls, magnitudes: ArrayLike, line_set: LineSet, line_map: NeuronLineMap) -> 'PNNWeights':
        """
        Строит допустимые веса w_i = c_i * u_{g(i)}.
        :param magnitudes: знаковые длины c_i (k-вектор)
        :param line_set: набор прямых
        :param line_map: отображение нейронов на прямые
        :return: веса сети
        """
        values = np.asarray(magnitudes, dtype=float).ravel()
        if values.shape[0] != line_map.num_neurons:
            msg = f'Expected {line_map.num_neurons} magnitudes, got {values.shape[0]}.'
            raise DimensionMismatchError(msg)
        return cls(matrix=line_set.unit_vectors[:, line_map.indices] * values, line_set=line_set, line_map=line_map)

    @classmethod
    def from_unconstrained(
        cls,
        matrix: np.ndarray,
        *,
        zero_tol: float = Tolerances.ZERO,
        collinearity_tol: float = Tolerances.COLLINEARITY,
    ) -> 'PNNWeights':
        """
        Представляет произвольную сеть как PNN на прямых ее собственных столбцов.
        Коллинеарные столбцы делят одну прямую, нулевые столбцы относятся к первой прямой.
        """
        columns = np.asarray(matrix, dtype=float)
        directions: List[np.ndarray] = []
        assignment: List[int] = []
        zero_columns: List[int] = []
        for i in range(columns.shape[1]):
            column = columns[:, i]
            if np.linalg.norm(column) <= zero_tol:
                zero_columns.append(i)
                assignment.append(0)
                continue

            unit, _ = canonicalize_vector(column, zero_tol=zero_tol)
            match = next(
                (j for j, known in enumerate(directions) if abs(float(known @ unit)) >= 1.0 - collinearity_tol),
                None,
            )
            if match is None:
                directions.append(unit)
                match = len(directions) - 1
            assignment.append(match)

        if not directions:
            msg = 'An all-zero network has no lines.'
            raise ZeroVectorError(msg)

        if zero_columns:
            logger.debug('Zero columns %s placed on line 0 with zero mass', zero_columns)
        line_set = LineSet.from_unit_vectors(np.column_stack(directions), collinearity_tol=collinearity_tol)
        line_map = NeuronLineMap(assignment=tuple(assignment), num_lines=len(directions))
        return cls(matrix=columns, line_set=line_set, line_map=line_map)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def num_neurons(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def assigned_lines(self) -> np.ndarray:
        """Матрица d×k, в i-м столбце которой лежит u_{g(i)}."""
        return self.line_set.unit_vectors[:, self.line_map.indices]

    @property
    def signed_magnitudes(self) -> np.ndarray:
        return np.sum(self.matrix * self.assigned_lines, axis=0)

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.matrix, axis=0)

    @property
    def total(self) -> np.ndarray:
        """Сумма столбцов весов."""
        return self.matrix.sum(axis=1)

    def line_deviation(self) -> np.ndarray:
        """Расстояние каждого столбца до его прямой."""
        residual = self.matrix - self.assigned_lines * self.signed_magnitudes
        return np.linalg.norm(residual, axis=0)

    def ensure_feasible(self, *, feasibility_tol: float = Tolerances.FEASIBILITY) -> None:
        deviation = self.line_deviation()
        limits = feasibility_tol * np.maximum(1.0, self.column_norms)
        bad = np.flatnonzero(deviation > limits)
        if bad.size:
            msg = f'Columns {bad.tolist()} deviate from their lines by up to {np.max(deviation):.3e}.'
            raise InfeasibleWeightsError(msg)

    def with_matrix(self, matrix: np.ndarray) -> 'PNNWeights':
        return PNNWeights(matrix=matrix, line_set=self.line_set, line_map=self.line_map)

    def same_config(self, other: 'PNNWeights') -> bool:
        return self.line_map == other.line_map and self.line_set.same_as(other.line_set)


def scalar_weights(w: ArrayLike) -> PNNWeights:
    """Скалярная PNN: d = 1, все нейроны на единственной прямой."""
    values = np.asarray(w, dtype=float).ravel()
    line_set = LineSet.from_unit_vectors(np.ones((1, 1)))
    line_map = NeuronLineMap(assignment=(0,) * values.shape[0], num_lines=1)
    return PNNWeights(matrix=values[None, :], line_set=line_set, line_map=line_map)


def decompose_weights(
    weights: PNNWeights,
    *,
    feasibility_tol: float = Tolerances.FEASIBILITY,
    zero_tol: float = Tolerances.ZERO,
) -> Tuple[np.ndarray, RegionSignature]:
    """
    Раскладывает веса на массы прямых q и сигнатуру области.
    :param weights: допустимые веса сети
    :param feasibility_tol: допуск отклонения столбца от прямой
    :param zero_tol: порог нулевого столбца
    :return: неотрицательный r-вектор q и сигнатура
    """
    weights.ensure_feasible(feasibility_tol=feasibility_tol)
    q = np.bincount(weights.line_map.indices, weights=weights.column_norms, minlength=weights.line_set.size)
    signature = RegionSignature.from_signed_magnitudes(weights.signed_magnitudes, weights.line_map, zero_tol=zero_tol)
    return q, signature


def _format_float(value: float) -> str:
    return format(float(value), '.17g')


def write_line_set(line_set: LineSet, stream: TextIO) -> None:
    """
    Записывает набор прямых в CSV: строка `d,r`, затем по строке на прямую.
    :param line_set: набор прямых
    :param stream: текстовый поток
    """
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow([line_set.dim, line_set.size])
    for index in range(line_set.size):
        writer.writerow([_format_float(value) for value in line_set.line(index)])


def _stored_column(vector: np.ndarray) -> np.ndarray:
    if abs(float(np.linalg.norm(vector)) - 1.0) <= Tolerances.UNIT_NORM:
        if _orientation_flags(vector[:, None], zero_tol=Tolerances.ZERO)[0] > 0:
            return vector
    return canonicalize_vector(vector)[0]


def read_line_set(stream: TextIO, *, collinearity_tol: Optional[float] = None) -> LineSet:
    """
    Читает набор прямых в формате `write_line_set`. Канонические единичные строки берутся как есть,
    остальные нормируются и ориентируются.
    :param stream: текстовый поток
    :param collinearity_tol: допуск коллинеарности
    :return: набор прямых
    """
    rows = [row for row in csv.reader(stream) if row and not row[0].startswith('#')]
    if not rows:
        msg = 'Empty line set file.'
        raise ParameterOutOfRangeError(msg)

    d, r = (int(value) for value in rows[0])
    if d < 1 or r < 1:
        msg = f'Line set header must declare positive d and r, got d={d}, r={r}.'
        raise ParameterOutOfRangeError(msg)

    vectors = [[float(value) for value in row] for row in rows[1:]]
    if len(vectors) != r or any(len(vector) != d for vector in vectors):
        msg = f'Line set header declares d={d}, r={r}, body does not match.'
        raise DimensionMismatchError(msg)

    tol = Tolerances.COLLINEARITY if collinearity_tol is None else collinearity_tol
    columns = [_stored_column(np.asarray(vector, dtype=float)) for vector in vectors]
    return LineSet.from_unit_vectors(np.column_stack(columns), collinearity_tol=tol)
