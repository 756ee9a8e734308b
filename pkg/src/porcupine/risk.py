import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from porcupine.errors import ConfigMismatchError, DimensionMismatchError, ParameterOutOfRangeError, ZeroVectorError
from porcupine.kernel import KernelBundle, degree_one_kernel, psi_apply
from porcupine.lines import ArrayLike, NeuronLineMap, PNNWeights, axis_line_set, cross_gram, decompose_weights
from porcupine.settings import Defaults, Tolerances

logger = logging.getLogger(__name__)

WeightsLike = Union[np.ndarray, PNNWeights]
Integrand = Callable[[np.ndarray], np.ndarray]


def as_matrix(weights: WeightsLike) -> np.ndarray:
    if isinstance(weights, PNNWeights):
        return weights.matrix
    matrix = np.asarray(weights, dtype=float)
    if matrix.ndim != 2:
        msg = f'Weights must be a d×k matrix, got shape {matrix.shape}.'
        raise DimensionMismatchError(msg)
    return matrix


def network_output(x: ArrayLike, weights: WeightsLike) -> Union[float, np.ndarray]:
    """
    Выход двухслойной сети sum_i relu(w_i^T x).
    :param x: вход d или пакет входов n×d
    :param weights: матрица весов d×k
    :return: число для одного входа, n-вектор для пакета
    """
    matrix = as_matrix(weights)
    inputs = np.asarray(x, dtype=float)
    if inputs.shape[-1] != matrix.shape[0]:
        msg = f'Input dimension {inputs.shape[-1]} does not match weights with {matrix.shape[0]} rows.'
        raise DimensionMismatchError(msg)

    output = np.maximum(inputs @ matrix, 0.0).sum(axis=-1)
    if np.ndim(output) == 0:
        return float(output)
    return output


def gaussian_relu_mean(w: ArrayLike) -> float:
    """E[relu(w^T x)] = ||w|| / sqrt(2 pi) для x ~ N(0, I)."""
    return float(np.linalg.norm(np.asarray(w, dtype=float)) / np.sqrt(2.0 * np.pi))


def _chunk_moments(
    integrand: Integrand,
    d: int,
    pairs: int,
    seed_sequence: np.random.SeedSequence,
    *,
    antithetic: bool,
) -> Tuple[int, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_sequence)
    x = rng.standard_normal((pairs, d))
    values = np.asarray(integrand(x), dtype=float).reshape(pairs, -1)
    if antithetic:
        values = (values + np.asarray(integrand(-x), dtype=float).reshape(pairs, -1)) / 2
    mean = values.mean(axis=0)
    return pairs, mean, ((values - mean) ** 2).sum(axis=0)


def monte_carlo_mean(
    integrand: Integrand,
    d: int,
    n_samples: int,
    seed: int,
    *,
    antithetic: bool = True,
    chunk_size: int = Defaults.MC_CHUNK,
    threads: int = Defaults.THREADS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Оценка E[f(x)], x ~ N(0, I_d), с антитетическими парами (x, -x) и детерминированной редукцией по порциям.
    :param integrand: функция от пакета n×d, возвращающая n или n×p значений
    :param d: размерность входа
    :param n_samples: число вычислений подынтегральной функции
    :param seed: seed; порции получают независимые потоки через SeedSequence.spawn
    :param antithetic: усреднять ли f(x) и f(-x)
    :param chunk_size: размер порции
    :param threads: число потоков для порций
    :return: оценка среднего и ее стандартная ошибка (массивы длины p)
    """
    if n_samples < 1:
        msg = f'n_samples must be positive, got {n_samples}.'
        raise ParameterOutOfRangeError(msg)

    per_draw = 2 if antithetic else 1
    draws = max(1, -(-n_samples // per_draw))
    step = max(1, chunk_size // per_draw)
    sizes = [min(step, draws - start) for start in range(0, draws, step)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job: Tuple[int, np.random.SeedSequence]) -> Tuple[int, np.ndarray, np.ndarray]:
        return _chunk_moments(integrand, d, job[0], job[1], antithetic=antithetic)

    jobs = list(zip(sizes, children))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts: List[Tuple[int, np.ndarray, np.ndarray]] = list(executor.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]

    count, mean, m2 = parts[0]
    for other_count, other_mean, other_m2 in parts[1:]:
        total = count + other_count
        delta = other_mean - mean
        mean = mean + delta * other_count / total
        m2 = m2 + other_m2 + delta**2 * count * other_count / total
        count = total

    variance = m2 / (count - 1) if count > 1 else np.zeros_like(m2)
    return mean, np.sqrt(variance / count)


def monte_carlo_risk(
    weights: WeightsLike,
    weights_star: WeightsLike,
    n_samples: int = Defaults.MC_SAMPLES,
    seed: int = Defaults.SEED,
    *,
    threads: int = Defaults.THREADS,
    chunk_size: int = Defaults.MC_CHUNK,
) -> Tuple[float, float]:
    """
    Оценка популяционного риска E[(h(x; W) - h(x; W*))^2] методом Монте-Карло.
    :return: оценка и стандартная ошибка
    """
    matrix, matrix_star = as_matrix(weights), as_matrix(weights_star)
    if matrix.shape[0] != matrix_star.shape[0]:
        msg = f'Networks have input dimensions {matrix.shape[0]} and {matrix_star.shape[0]}.'
        raise DimensionMismatchError(msg)

    def squared_error(x: np.ndarray) -> np.ndarray:
        return (np.maximum(x @ matrix, 0.0).sum(axis=1) - np.maximum(x @ matrix_star, 0.0).sum(axis=1)) ** 2

    mean, stderr = monte_carlo_mean(
        squared_error,
        matrix.shape[0],
        n_samples,
        seed,
        threads=threads,
        chunk_size=chunk_size,
    )
    return float(mean[0]), float(stderr[0])


@dataclass(frozen=True)
class RiskBreakdown:
    """Разложение популяционного риска на линейную и ядерную части."""

    linear_term: float
    kernel_term: float
    total: float

    @classmethod
    def from_terms(cls, linear_term: float, kernel_term: float) -> 'RiskBreakdown':
        return cls(linear_term=float(linear_term), kernel_term=float(kernel_term), total=float(linear_term + kernel_term))

    @property
    def reported_total(self) -> float:
        return max(self.total, 0.0)


def _linear_term(weights: WeightsLike, weights_star: WeightsLike) -> float:
    difference = as_matrix(weights).sum(axis=1) - as_matrix(weights_star).sum(axis=1)
    return 0.25 * float(difference @ difference)


def scalar_risk(w: ArrayLike, w_star: ArrayLike) -> RiskBreakdown:
    """
    Риск скалярной PNN: (1/4)(sum w - sum w*)^2 + (1/4)(sum |w| - sum |w*|)^2.
    """
    values, values_star = np.asarray(w, dtype=float).ravel(), np.asarray(w_star, dtype=float).ravel()
    linear = 0.25 * (values.sum() - values_star.sum()) ** 2
    kernel = 0.25 * (np.abs(values).sum() - np.abs(values_star).sum()) ** 2
    return RiskBreakdown.from_terms(linear, kernel)


def degree_one_risk(
    weights: WeightsLike,
    weights_star: WeightsLike,
    line_map: NeuronLineMap,
    *,
    star_map: Optional[NeuronLineMap] = None,
    feasibility_tol: float = Tolerances.FEASIBILITY,
) -> RiskBreakdown:
    """
    Риск PNN степени один, прямые которой совпадают с осями координат.
    :param weights: веса d×k
    :param weights_star: веса, порождающие данные
    :param line_map: отображение нейронов на оси
    :param star_map: отображение для weights_star, если оно отличается
    """
    matrix, matrix_star = as_matrix(weights), as_matrix(weights_star)
    axes = axis_line_set(matrix.shape[0])
    pnn = PNNWeights(matrix=matrix, line_set=axes, line_map=line_map)
    pnn_star = PNNWeights(matrix=matrix_star, line_set=axes, line_map=star_map or line_map)
    q, _ = decompose_weights(pnn, feasibility_tol=feasibility_tol)
    q_star, _ = decompose_weights(pnn_star, feasibility_tol=feasibility_tol)
    difference = q - q_star
    return RiskBreakdown.from_terms(
        _linear_term(matrix, matrix_star),
        0.25 * float(difference @ degree_one_kernel(matrix.shape[0]) @ difference),
    )


def matched_risk(
    weights: PNNWeights,
    weights_star: PNNWeights,
    *,
    feasibility_tol: float = Tolerances.FEASIBILITY,
) -> RiskBreakdown:
    """
    Риск согласованной PNN: (1/4)||sum w - sum w*||^2 + (1/4)(q - q*)^T psi[K_L] (q - q*).
    """
    if not weights.same_config(weights_star):
        msg = 'Matched risk requires both networks on the same lines and neuron map.'
        raise ConfigMismatchError(msg)

    q, _ = decompose_weights(weights, feasibility_tol=feasibility_tol)
    q_star, _ = decompose_weights(weights_star, feasibility_tol=feasibility_tol)
    difference = q - q_star
    kernel = psi_apply(weights.line_set.gram)
    return RiskBreakdown.from_terms(_linear_term(weights, weights_star), 0.25 * float(difference @ kernel @ difference))


def mismatched_risk(
    weights: PNNWeights,
    weights_star: PNNWeights,
    *,
    bundle: Optional[KernelBundle] = None,
    feasibility_tol: float = Tolerances.FEASIBILITY,
) -> RiskBreakdown:
    """
    Риск PNN, обученной на прямых, отличных от прямых порождающей сети.
    :param weights: веса на (L, G)
    :param weights_star: веса на (L*, G*)
    :param bundle: заранее вычисленные блоки psi[K] для этой пары наборов
    :param feasibility_tol: допуск отклонения столбца от прямой
    :return: разложение риска
    """
    if weights.dim != weights_star.dim:
        msg = f'Networks have input dimensions {weights.dim} and {weights_star.dim}.'
        raise DimensionMismatchError(msg)

    q, _ = decompose_weights(weights, feasibility_tol=feasibility_tol)
    q_star, _ = decompose_weights(weights_star, feasibility_tol=feasibility_tol)
    if bundle is None:
        psi_LL = psi_apply(weights.line_set.gram)
        psi_cross = psi_apply(cross_gram(weights.line_set, weights_star.line_set))
        psi_star = psi_apply(weights_star.line_set.gram)
    else:
        psi_LL, psi_cross, psi_star = bundle.psi_LL, bundle.psi_cross, bundle.psi_star

    kernel = 0.25 * float(q @ psi_LL @ q) + 0.25 * float(q_star @ psi_star @ q_star) - 0.5 * float(q @ psi_cross @ q_star)
    return RiskBreakdown.from_terms(_linear_term(weights, weights_star), kernel)


def truncated_covariance(w1: ArrayLike, w2: ArrayLike, *, zero_tol: float = Tolerances.ZERO) -> np.ndarray:
    """
    E[1{w1^T x > 0} 1{w2^T x > 0} x x^T] для x ~ N(0, I).
    :param w1: ненулевой вектор
    :param w2: ненулевой вектор
    :param zero_tol: порог нулевой нормы
    :return: матрица d×d
    """
    first, second = np.asarray(w1, dtype=float).ravel(), np.asarray(w2, dtype=float).ravel()
    norms = np.linalg.norm(first), np.linalg.norm(second)
    if min(norms) <= zero_tol:
        msg = 'Truncated covariance needs two non-zero vectors.'
        raise ZeroVectorError(msg)

    a, b = first / norms[0], second / norms[1]
    cosine = float(np.clip(a @ b, -1.0, 1.0))
    p = b - cosine * a
    sine = float(np.linalg.norm(p))
    theta = float(np.arctan2(sine, cosine))
    result = (np.pi - theta) / (2.0 * np.pi) * np.eye(a.shape[0])
    if sine > 0.0:
        # sin(theta) * M, где M = c (a a^T - p^ p^T) + s (a p^T + p a^T), а p = s * p^
        scaled = cosine * (sine * np.outer(a, a) - np.outer(p, p) / sine) + sine * (np.outer(a, p) + np.outer(p, a))
        result = result + scaled / (2.0 * np.pi)
    return result
