import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

from porcupine.errors import (
    ConfigError,
    DimensionMismatchError,
    DivergedError,
    ParameterOutOfRangeError,
    PreconditionViolatedError,
    ZeroColumnError,
)
from porcupine.kernel import KernelBundle
from porcupine.landscape import line_gradient, region_condition, stationarity_check
from porcupine.lines import LineSet, NeuronLineMap, PNNWeights, RegionSignature, random_line_set
from porcupine.risk import WeightsLike, as_matrix, mismatched_risk
from porcupine.settings import Defaults, Tolerances, derive_seed, make_rng
from porcupine.types import LineSummary, Outcome

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    Параметры SGD с моментом. Скорость обучения умножается на decay_rate каждые decay_every_steps
    шагов по мини-пакетам; ранняя остановка выключена, если early_stop_threshold равен None.
    """

    batch_size: int = 100
    epochs: int = 200
    learning_rate: float = 0.01
    momentum: float = 0.9
    decay_rate: float = 0.95
    decay_every_steps: int = 390
    early_stop_window: int = 10
    early_stop_threshold: Optional[float] = 1e-5
    seed: int = Defaults.SEED
    samples: int = 2000

    def __post_init__(self) -> None:
        counts = {
            'batch_size': self.batch_size,
            'epochs': self.epochs,
            'decay_every_steps': self.decay_every_steps,
            'early_stop_window': self.early_stop_window,
            'samples': self.samples,
        }
        bad = sorted(name for name, value in counts.items() if value < 1)
        if bad:
            msg = f'Config fields must be positive: {bad}.'
            raise ConfigError(msg)

        if not self.learning_rate > 0:
            msg = f'learning_rate must be positive, got {self.learning_rate}.'
            raise ConfigError(msg)

        if not 0.0 <= self.momentum < 1.0:
            msg = f'momentum must lie in [0, 1), got {self.momentum}.'
            raise ConfigError(msg)

        if not 0.0 < self.decay_rate <= 1.0:
            msg = f'decay_rate must lie in (0, 1], got {self.decay_rate}.'
            raise ConfigError(msg)

        if self.early_stop_threshold is not None and self.early_stop_threshold < 0:
            msg = f'early_stop_threshold must be non-negative, got {self.early_stop_threshold}.'
            raise ConfigError(msg)

    @classmethod
    def matched_desk(cls, **changes: Any) -> 'TrainConfig':
        """Согласованный протокол в уменьшенном масштабе."""
        return dataclasses.replace(cls(), **changes)

    @classmethod
    def mismatched_desk(cls, **changes: Any) -> 'TrainConfig':
        """Протокол со случайными прямыми: без момента и ранней остановки."""
        base = cls(
            learning_rate=1e-3,
            momentum=0.0,
            decay_rate=1.0,
            epochs=100,
            early_stop_threshold=None,
            samples=4000,
        )
        return dataclasses.replace(base, **changes)

    @classmethod
    def paper_scale(cls, *, matched: bool = True, **changes: Any) -> 'TrainConfig':
        base = cls.matched_desk(epochs=1000) if matched else cls.mismatched_desk()
        return dataclasses.replace(base, samples=10_000, **changes)

    def replace(self, **changes: Any) -> 'TrainConfig':
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Входы n×d и выходы n."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.shape != (self.inputs.shape[0],):
            msg = f'Inputs {self.inputs.shape} and targets {self.targets.shape} do not form a dataset.'
            raise DimensionMismatchError(msg)

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    def split(self) -> Tuple['Dataset', 'Dataset']:
        """Две равные половины: обучающая и тестовая."""
        half = len(self) // 2
        return (
            Dataset(inputs=self.inputs[:half], targets=self.targets[:half]),
            Dataset(inputs=self.inputs[half:], targets=self.targets[half:]),
        )


def _outputs(inputs: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return np.maximum(inputs @ matrix, 0.0).sum(axis=1)


def generate_dataset(W_star: WeightsLike, n: int, seed: int) -> Dataset:
    """
    Пары (x, h(x; W*)) с x ~ N(0, I).
    :param W_star: веса порождающей сети d×k
    :param n: число пар
    :param seed: seed генератора
    :return: набор данных
    """
    if n < 1:
        msg = f'Dataset size must be positive, got {n}.'
        raise ParameterOutOfRangeError(msg)

    matrix = as_matrix(W_star)
    inputs = np.random.default_rng(seed).standard_normal((n, matrix.shape[0]))
    return Dataset(inputs=inputs, targets=_outputs(inputs, matrix))


def init_random_pnn(d: int, r: int, seed: int) -> Tuple[LineSet, NeuronLineMap, PNNWeights]:
    """
    Случайная PNN с двумя нейронами на каждой из r случайных прямых: первый с длиной из (0, 1],
    второй с длиной из [-1, 0).
    """
    if r < 1:
        msg = f'Need at least one line, got r={r}.'
        raise ParameterOutOfRangeError(msg)

    line_set = random_line_set(d, r, derive_seed(seed, 'lines'))
    line_map = NeuronLineMap.blocks(r, 2)
    rng = make_rng(seed, 'magnitudes')
    magnitudes = np.column_stack([1.0 - rng.random(r), rng.random(r) - 1.0]).ravel()
    return line_set, line_map, PNNWeights.from_magnitudes(magnitudes, line_set, line_map)


@dataclass(frozen=True, eq=False)
class TrainResult:
    final_train_loss: float
    final_test_loss_normalized: float
    epochs_run: int
    final_signature: RegionSignature
    line_feasibility_ok: bool
    trajectory: Tuple[float, ...]
    final_weights: PNNWeights


def _normalized_error(data: Dataset, matrix: np.ndarray) -> float:
    squared = float(np.sum((_outputs(data.inputs, matrix) - data.targets) ** 2))
    scale = float(np.sum(data.targets**2))
    return squared / scale if scale > 0 else squared / len(data)


def _on_lines(weights: PNNWeights, matrix: np.ndarray) -> bool:
    current = weights.with_matrix(matrix)
    limits = Tolerances.LINE_DEVIATION * np.maximum(1.0, current.column_norms)
    return bool(np.all(current.line_deviation() <= limits))


def sgd_train(
    data: Dataset,
    init_weights: PNNWeights,
    config: TrainConfig,
    *,
    projection: bool = True,
    test_data: Optional[Dataset] = None,
) -> TrainResult:
    """
    Мини-пакетный SGD с моментом на эмпирической квадратичной ошибке. С проекцией градиент
    каждого нейрона заменяется его проекцией на прямую нейрона. Производная relu в нуле равна нулю.
    :param data: обучающие пары
    :param init_weights: начальные веса
    :param config: параметры обучения
    :param projection: проецировать ли градиенты на прямые
    :param test_data: отложенные пары для нормированной ошибки; по умолчанию обучающие
    :return: результат обучения
    """
    if len(data) < config.batch_size:
        msg = f'batch_size {config.batch_size} exceeds the dataset size {len(data)}.'
        raise ConfigError(msg)

    if data.dim != init_weights.dim:
        msg = f'Data dimension {data.dim} does not match weights dimension {init_weights.dim}.'
        raise DimensionMismatchError(msg)

    rng = make_rng(config.seed, 'sgd')
    directions = init_weights.assigned_lines
    matrix = np.array(init_weights.matrix)
    velocity = np.zeros_like(matrix)
    trajectory: List[float] = []
    feasible = True
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        losses = []
        for start in range(0, len(data), config.batch_size):
            batch = order[start : start + config.batch_size]
            inputs, targets = data.inputs[batch], data.targets[batch]
            pre = inputs @ matrix
            residual = np.maximum(pre, 0.0).sum(axis=1) - targets
            losses.append(float(np.mean(residual**2)))
            gradient = (2.0 / batch.size) * inputs.T @ ((pre > 0) * residual[:, None])
            if projection:
                gradient = directions * np.sum(gradient * directions, axis=0)

            rate = config.learning_rate * config.decay_rate ** (step // config.decay_every_steps)
            velocity = config.momentum * velocity - rate * gradient
            matrix = matrix + velocity
            step += 1

        epoch_loss = float(np.mean(losses))
        if not np.isfinite(epoch_loss) or not np.all(np.isfinite(matrix)):
            msg = f'Training diverged at epoch {epoch}.'
            raise DivergedError(msg)

        trajectory.append(epoch_loss)
        logger.debug('Epoch %d: mean loss %.6g', epoch, epoch_loss)
        if projection and feasible and not _on_lines(init_weights, matrix):
            feasible = False
            logger.warning('Columns left their lines at epoch %d', epoch)

        window = trajectory[-config.early_stop_window :]
        if (
            config.early_stop_threshold is not None
            and len(window) == config.early_stop_window
            and float(np.mean(window)) < config.early_stop_threshold
        ):
            break

    if not projection:
        feasible = _on_lines(init_weights, matrix)

    final = init_weights.with_matrix(matrix)
    return TrainResult(
        final_train_loss=float(np.mean((_outputs(data.inputs, matrix) - data.targets) ** 2)),
        final_test_loss_normalized=_normalized_error(data if test_data is None else test_data, matrix),
        epochs_run=len(trajectory),
        final_signature=RegionSignature.from_signed_magnitudes(final.signed_magnitudes, final.line_map),
        line_feasibility_ok=feasible,
        trajectory=tuple(trajectory),
        final_weights=final,
    )


@dataclass(frozen=True, eq=False)
class DescentResult:
    weights: PNNWeights
    risk: float
    steps: int


def population_descent(
    init: PNNWeights,
    weights_star: PNNWeights,
    *,
    learning_rate: float = 0.05,
    momentum: float = 0.5,
    steps: int = 20_000,
    tol: float = 1e-12,
) -> DescentResult:
    """
    Градиентный спуск с моментом по знаковым длинам нейронов на популяционном риске в замкнутой форме.
    Останавливается, когда все производные по модулю не больше tol.
    """
    bundle = KernelBundle.from_line_sets(init.line_set, weights_star.line_set, check_psd=False)
    magnitudes = np.array(init.signed_magnitudes)
    velocity = np.zeros_like(magnitudes)
    weights = init
    done = 0
    for done in range(1, steps + 1):
        gradient = line_gradient(weights, weights_star, bundle=bundle)
        if float(np.max(np.abs(gradient))) <= tol:
            break
        velocity = momentum * velocity - learning_rate * gradient
        magnitudes = magnitudes + velocity
        weights = PNNWeights.from_magnitudes(magnitudes, init.line_set, init.line_map)

    risk = mismatched_risk(weights, weights_star, bundle=bundle).reported_total
    return DescentResult(weights=weights, risk=risk, steps=done)


@dataclass(frozen=True)
class OutcomeReport:
    outcome: Outcome
    loss: float
    violates_condition: bool
    uniform_lines: int


def classify_outcome(
    result: TrainResult,
    weights_star: PNNWeights,
    *,
    tol: float = 1e-5,
    stationarity_tol: float = 0.1,
) -> OutcomeReport:
    """
    Исход обучения по популяционному риску конечных весов: Global при риске не выше tol, BadLocal
    в стационарной точке с большим риском, иначе NotConverged.
    :param result: результат обучения
    :param weights_star: порождающая сеть
    :param tol: порог глобального оптимума
    :param stationarity_tol: допуск проекций градиента
    :return: исход, риск и флаг нарушения условия смешанных знаков
    """
    if not result.line_feasibility_ok:
        msg = 'Outcome is defined only for runs whose weights stayed on their lines; train with projection.'
        raise PreconditionViolatedError(msg)

    weights = result.final_weights
    loss = mismatched_risk(weights, weights_star).reported_total
    signature = result.final_signature
    uniform = sum(summary is not LineSummary.MIXED for summary in signature.summaries)
    if loss <= tol:
        outcome = Outcome.GLOBAL
    else:
        try:
            stationary = stationarity_check(weights, weights_star, tol=stationarity_tol)
        except ZeroColumnError:
            stationary = False
        outcome = Outcome.BAD_LOCAL if stationary else Outcome.NOT_CONVERGED
    return OutcomeReport(
        outcome=outcome,
        loss=loss,
        violates_condition=not region_condition(signature, weights.dim),
        uniform_lines=uniform,
    )
