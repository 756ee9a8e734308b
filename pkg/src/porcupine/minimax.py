import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.special

from porcupine.errors import BoundViolatedError, CoverageNotReachedError, DomainError, ParameterOutOfRangeError
from porcupine.lines import ArrayLike, LineSet, canonicalize_vector
from porcupine.risk import as_matrix, monte_carlo_mean
from porcupine.settings import Defaults, Tolerances, derive_seed

logger = logging.getLogger(__name__)


def _check_angle(delta: float) -> None:
    if not 0.0 < delta <= np.pi / 2:
        msg = f'Net angle must lie in (0, pi/2], got {delta}.'
        raise DomainError(msg)


def _unit_rows(points: np.ndarray) -> np.ndarray:
    return points / np.linalg.norm(points, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class AngularNet:
    """Угловая delta-сеть: любое допустимое направление лежит в пределах delta от vectors или -vectors."""

    dim: int
    delta: float
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return int(self.vectors.shape[1])

    def as_line_set(self) -> LineSet:
        return LineSet.from_unit_vectors(self.vectors)


def net_size_bound(n: int, delta: float) -> float:
    """Размер угловой delta-сети сферы S^(n-1): (1/2)(1 + sqrt(2) / sqrt(1 - cos delta))^n."""
    _check_angle(delta)
    return 0.5 * (1.0 + np.sqrt(2.0) / np.sqrt(1.0 - np.cos(delta))) ** n


def sparse_net_size(d: int, s: int, delta: float, k: Optional[int] = None) -> float:
    """
    Размер сети для s-разреженных весов.
    :param d: размерность
    :param s: число ненулевых элементов
    :param delta: угол сети
    :param k: число нейронов, если их шаблоны разреженности известны
    :return: (1/2) C(d, s) (...)^s или (k/2) (...)^s
    """
    if not 1 <= s <= d:
        msg = f'Sparsity must satisfy 1 <= s <= d, got s={s}, d={d}.'
        raise DomainError(msg)
    _check_angle(delta)
    base = (1.0 + np.sqrt(2.0) / np.sqrt(1.0 - np.cos(delta))) ** s
    if k is not None:
        return 0.5 * k * base
    return 0.5 * float(scipy.special.comb(d, s, exact=True)) * base


def sparse_lines_bound(d: int, s: int, k: int, M: float, risk: float, *, known_patterns: bool = False) -> float:
    """
    Число прямых, достаточное для минимаксного риска не выше risk на s-разреженных сетях:
    (1/2) C(d, s) (1 + 2 k M sqrt(d) / risk)^s, при известных шаблонах (k/2) (...)^s.
    """
    if not 1 <= s <= d:
        msg = f'Sparsity must satisfy 1 <= s <= d, got s={s}, d={d}.'
        raise DomainError(msg)
    if risk <= 0 or k < 1 or M <= 0:
        msg = f'Need risk > 0, k >= 1 and M > 0, got risk={risk}, k={k}, M={M}.'
        raise ParameterOutOfRangeError(msg)

    base = (1.0 + 2.0 * k * M * np.sqrt(d) / risk) ** s
    if known_patterns:
        return 0.5 * k * base
    return 0.5 * float(scipy.special.comb(d, s, exact=True)) * base


def _coverage_gap(
    vectors: np.ndarray,
    d: int,
    n_samples: int,
    seed: int,
    *,
    batch: int,
) -> float:
    rng = np.random.default_rng(seed)
    worst = 1.0
    for start in range(0, n_samples, batch):
        points = _unit_rows(rng.standard_normal((min(batch, n_samples - start), d)))
        worst = min(worst, float(np.min(np.max(np.abs(points @ vectors), axis=1))))
    return float(np.arccos(np.clip(worst, -1.0, 1.0)))


def greedy_angular_net(
    d: int,
    delta: float,
    seed: int,
    *,
    max_candidates: int = Defaults.MAX_CANDIDATES,
    candidate_budget: int = Defaults.CANDIDATE_BUDGET,
    shrink: float = Defaults.NET_SHRINK,
    max_dim: int = Defaults.NET_MAX_DIM,
    batch: int = Defaults.SAMPLE_BATCH,
    coverage_samples: int = Defaults.COVERAGE_SAMPLES,
) -> AngularNet:
    """
    Жадно строит угловую delta-сеть полусферы. Случайная точка добавляется в сеть, если ее угол до сети больше
    shrink * delta; построение останавливается после max_candidates подряд покрытых кандидатов, затем сеть
    проверяется на coverage_samples свежих точках.
    :param d: размерность
    :param delta: угол сети
    :param seed: seed генератора
    :param max_candidates: длина серии покрытых кандидатов для остановки
    :param candidate_budget: общий лимит кандидатов
    :param shrink: запас по углу при добавлении
    :param max_dim: наибольшая допустимая размерность
    :param batch: размер пакета точек
    :param coverage_samples: число точек итоговой проверки
    :return: сеть с каноническими векторами
    """
    _check_angle(delta)
    if not 1 <= d <= max_dim:
        msg = f'Greedy nets are built for 1 <= d <= {max_dim}, got d={d}.'
        raise ParameterOutOfRangeError(msg)

    if d == 1:
        return AngularNet(dim=1, delta=delta, vectors=np.ones((1, 1)))

    rng = np.random.default_rng(seed)
    accept = np.cos(shrink * delta)
    net: List[np.ndarray] = []
    streak = used = 0
    while streak < max_candidates:
        if used >= candidate_budget:
            msg = f'No {max_candidates} consecutive covered points within a budget of {candidate_budget}.'
            raise CoverageNotReachedError(msg)

        points = _unit_rows(rng.standard_normal((batch, d)))
        used += batch
        best = np.max(np.abs(points @ np.column_stack(net)), axis=1) if net else np.zeros(batch)
        fresh: List[np.ndarray] = []
        for point, score in zip(points, best):
            if fresh:
                score = max(score, float(np.max(np.abs(np.column_stack(fresh).T @ point))))
            if score >= accept:
                streak += 1
                if streak >= max_candidates:
                    break
                continue
            fresh.append(canonicalize_vector(point)[0])
            streak = 0
        net.extend(fresh)
        if fresh:
            logger.debug('Angular net grew to %d vectors after %d points', len(net), used)

    vectors = np.column_stack(net)
    gap = _coverage_gap(vectors, d, coverage_samples, derive_seed(seed, 'coverage'), batch=batch)
    if gap > delta:
        msg = f'Net of {len(net)} vectors leaves an angular gap {gap:.4f} above delta={delta:.4f}.'
        raise CoverageNotReachedError(msg)
    return AngularNet(dim=d, delta=delta, vectors=vectors)


def net_coverage(
    net: AngularNet,
    n_samples: int = Defaults.COVERAGE_SAMPLES,
    seed: int = Defaults.SEED,
    *,
    batch: int = Defaults.SAMPLE_BATCH,
) -> float:
    """Наибольший угол от равномерных точек сферы до сети (с учетом знака)."""
    if n_samples < 1:
        msg = f'n_samples must be positive, got {n_samples}.'
        raise ParameterOutOfRangeError(msg)
    return _coverage_gap(net.vectors, net.dim, n_samples, seed, batch=batch)


def nearest_net_approx(W_star: ArrayLike, net: AngularNet) -> Tuple[np.ndarray, float]:
    """
    Заменяет каждый столбец W* ближайшим направлением сети с сохранением нормы.
    :param W_star: матрица весов d×k
    :param net: угловая сеть
    :return: приближенные веса и наибольший угол сопоставления
    """
    matrix = as_matrix(np.asarray(W_star, dtype=float))
    norms = np.linalg.norm(matrix, axis=0)
    safe = np.where(norms > Tolerances.ZERO, norms, 1.0)
    cosines = net.vectors.T @ (matrix / safe)
    nearest = np.argmax(np.abs(cosines), axis=0)
    columns = np.arange(matrix.shape[1])
    chosen = cosines[nearest, columns]
    directions = net.vectors[:, nearest] * np.where(chosen < 0, -1.0, 1.0)
    approx = directions * norms
    angles = np.where(norms > Tolerances.ZERO, np.arccos(np.clip(np.abs(chosen), -1.0, 1.0)), 0.0)
    return approx, float(np.max(angles)) if angles.size else 0.0


def minimax_risk_bound(k: int, M: float, d: int, delta: float) -> float:
    """Оценка минимаксного риска k M sqrt(2 d (1 - cos delta)) для сети из k нейронов с ||w|| <= M."""
    if k < 1 or d < 1 or M < 0 or delta < 0:
        msg = f'Invalid parameters k={k}, M={M}, d={d}, delta={delta}.'
        raise ParameterOutOfRangeError(msg)
    return float(k * M * np.sqrt(2.0 * d * (1.0 - np.cos(delta))))


def relu_gap(w1: ArrayLike, w2: ArrayLike, x: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    |relu(w1^T x) - relu(w2^T x)| и ее оценка ||w1 - w2|| ||x||; векторы лежат вдоль последней оси.
    :raise BoundViolatedError: если оценка нарушена хотя бы для одной тройки
    """
    first, second, inputs = (np.asarray(value, dtype=float) for value in (w1, w2, x))
    gap = np.abs(np.maximum(np.sum(first * inputs, axis=-1), 0.0) - np.maximum(np.sum(second * inputs, axis=-1), 0.0))
    bound = np.linalg.norm(first - second, axis=-1) * np.linalg.norm(inputs, axis=-1)
    slack = 1e-12 * np.maximum(1.0, bound)
    if np.any(gap > bound + slack):
        msg = f'relu continuity bound violated by {float(np.max(gap - bound)):.3e}.'
        raise BoundViolatedError(msg)
    return gap, bound


def approximation_error(
    W_star: ArrayLike,
    W_tilde: ArrayLike,
    n_samples: int = Defaults.MC_SAMPLES,
    seed: int = Defaults.SEED,
    *,
    threads: int = Defaults.THREADS,
) -> Tuple[float, float]:
    """
    Оценка E|h(x; W*) - h(x; W~)| методом Монте-Карло.
    :return: оценка и стандартная ошибка
    """
    matrix, matrix_tilde = as_matrix(np.asarray(W_star, dtype=float)), as_matrix(np.asarray(W_tilde, dtype=float))

    def absolute_error(x: np.ndarray) -> np.ndarray:
        return np.abs(np.maximum(x @ matrix, 0.0).sum(axis=1) - np.maximum(x @ matrix_tilde, 0.0).sum(axis=1))

    mean, stderr = monte_carlo_mean(absolute_error, matrix.shape[0], n_samples, seed, threads=threads)
    return float(mean[0]), float(stderr[0])
