import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.stats

from porcupine.errors import (
    ConfigMismatchError,
    DimensionMismatchError,
    ParameterOutOfRangeError,
    SingularKernelError,
    SingularProjectorError,
    ZeroColumnError,
)
from porcupine.kernel import KernelBundle, min_eigenvalue, pinv_symmetric, psi_apply
from porcupine.lines import ArrayLike, LineSet, PNNWeights, RegionSignature, cross_gram, decompose_weights
from porcupine.risk import WeightsLike, as_matrix
from porcupine.settings import Tolerances
from porcupine.types import LineSummary, RegionLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegionClassification:
    """Метка области и прямые, нарушающие условие смешанных знаков."""

    label: RegionLabel
    witness: Tuple[int, ...] = ()


def _is_uniform(signs: np.ndarray) -> bool:
    return bool(np.all(signs == signs[0]))


def scalar_region_classify(s: ArrayLike, w_star: ArrayLike) -> RegionClassification:
    """
    Разбор случаев для скалярной PNN по знакам s области и знакам w*.
    :param s: k-вектор из ±1
    :param w_star: веса, порождающие данные
    :return: одна из меток OnlyGlobal, OnlyBadLocal, NoOptima
    """
    signs = np.where(np.asarray(s, dtype=float).ravel() < 0, -1, 1)
    signs_star = np.where(np.asarray(w_star, dtype=float).ravel() < 0, -1, 1)
    if signs.size < 1:
        msg = 'A scalar network needs at least one neuron.'
        raise ParameterOutOfRangeError(msg)

    if not _is_uniform(signs_star):
        if _is_uniform(signs):
            return RegionClassification(label=RegionLabel.ONLY_BAD_LOCAL)
        return RegionClassification(label=RegionLabel.ONLY_GLOBAL)

    if _is_uniform(signs) and signs[0] == signs_star[0]:
        return RegionClassification(label=RegionLabel.ONLY_GLOBAL)
    return RegionClassification(label=RegionLabel.NO_OPTIMA)


def scalar_hessian(s: ArrayLike) -> Tuple[np.ndarray, int]:
    """Гессиан скалярного риска внутри области: (1/2) 11^T + (1/2) s s^T и его ранг."""
    signs = np.asarray(s, dtype=float).ravel()
    ones = np.ones_like(signs)
    hessian = 0.5 * np.outer(ones, ones) + 0.5 * np.outer(signs, signs)
    return hessian, int(np.linalg.matrix_rank(hessian))


def region_condition(signature: RegionSignature, d: int) -> bool:
    """Не менее d прямых несут нейроны обоих знаков."""
    return signature.mixed_count >= d


def classify_region(signature: RegionSignature, d: int) -> RegionClassification:
    witness = tuple(i for i, summary in enumerate(signature.summaries) if summary is not LineSummary.MIXED)
    if region_condition(signature, d):
        return RegionClassification(label=RegionLabel.GOOD_REGION, witness=witness)
    return RegionClassification(label=RegionLabel.MAY_HAVE_BAD_LOCAL, witness=witness)


def good_region_probability(d: int, r: int, t: int) -> float:
    """
    Вероятность того, что случайная область с t нейронами на каждой из r прямых удовлетворяет условию
    смешанных знаков. Прямая смешана с вероятностью 1 - 2^(1 - t), прямые независимы.
    """
    if d < 1 or r < 1 or t < 1:
        msg = f'd, r and t must be positive, got d={d}, r={r}, t={t}.'
        raise ParameterOutOfRangeError(msg)
    mixed = 1.0 - 2.0 ** (1 - t)
    return float(scipy.stats.binom.sf(d - 1, r, mixed))


@dataclass(frozen=True)
class GlobalOptimumReport:
    is_global: bool
    sum_residual: float
    mass_residual: float
    kernel_min_eigenvalue: float
    kernel_pd: bool

    @property
    def certificate(self) -> str:
        return 'iff' if self.kernel_pd else 'sufficient'


def global_optimum_check(
    weights: PNNWeights,
    weights_star: PNNWeights,
    *,
    tol: float = 1e-9,
    pd_tol: float = Tolerances.PD,
) -> GlobalOptimumReport:
    """
    Проверка достаточного (а при положительно определенном psi[K_L] и необходимого) условия глобального
    оптимума: sum w = sum w* и q = q*.
    :param weights: веса обучаемой сети
    :param weights_star: веса, порождающие данные, на той же конфигурации
    :param tol: относительный допуск невязок
    :param pd_tol: порог положительной определенности ядра
    :return: отчет с невязками
    """
    if not weights.same_config(weights_star):
        msg = 'Global optimum check requires a matched configuration.'
        raise ConfigMismatchError(msg)

    q, _ = decompose_weights(weights)
    q_star, _ = decompose_weights(weights_star)
    sum_residual = float(np.linalg.norm(weights.total - weights_star.total))
    mass_residual = float(np.linalg.norm(q - q_star))
    lowest = min_eigenvalue(psi_apply(weights.line_set.gram))
    kernel_pd = lowest > pd_tol
    if not kernel_pd:
        logger.warning('psi[K_L] is not positive definite (lambda_min=%.3e); check is sufficient only', lowest)

    scale = max(1.0, float(np.linalg.norm(weights_star.total)), float(np.linalg.norm(q_star)))
    return GlobalOptimumReport(
        is_global=sum_residual <= tol * scale and mass_residual <= tol * scale,
        sum_residual=sum_residual,
        mass_residual=mass_residual,
        kernel_min_eigenvalue=lowest,
        kernel_pd=kernel_pd,
    )


@dataclass(frozen=True, eq=False)
class GradientReport:
    """Полный градиент d×k и его проекции на прямые нейронов."""

    gradient: np.ndarray
    projected: np.ndarray


def _risk_gradient(matrix: np.ndarray, matrix_star: np.ndarray, *, zero_tol: float) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    zero = np.flatnonzero(norms <= zero_tol)
    if zero.size:
        msg = f'Gradient is undefined at zero columns {zero.tolist()}.'
        raise ZeroColumnError(msg)

    units = matrix / norms
    gradient = np.zeros_like(matrix)
    for others, sign in ((matrix, 1.0), (matrix_star, -1.0)):
        other_norms = np.linalg.norm(others, axis=0)
        safe = np.where(other_norms > zero_tol, other_norms, 1.0)
        cosines = np.clip(units.T @ (others / safe), -1.0, 1.0)
        theta = np.arccos(cosines)
        weight = (np.pi - theta) / (2.0 * np.pi)
        sines = np.sin(theta) * (other_norms > zero_tol)
        term = others @ weight.T + units * ((sines @ other_norms) / (2.0 * np.pi))
        gradient = gradient + sign * term
    return 2.0 * gradient


def analytic_gradient(
    weights: PNNWeights,
    data_model: WeightsLike,
    *,
    zero_tol: float = Tolerances.ZERO,
) -> GradientReport:
    """
    Градиент популяционного риска по весам, собранный из усеченных ковариаций:
    grad_j = 2 [sum_i T(w_j, w_i) w_i - sum_l T(w_j, w*_l) w*_l].
    :param weights: веса обучаемой сети, все столбцы ненулевые
    :param data_model: веса порождающей сети (любая конфигурация)
    :param zero_tol: порог нулевого столбца
    :return: полный градиент и проекции <grad_j, u_{g(j)}>
    """
    matrix_star = as_matrix(data_model)
    if matrix_star.shape[0] != weights.dim:
        msg = f'Data model has input dimension {matrix_star.shape[0]}, weights have {weights.dim}.'
        raise DimensionMismatchError(msg)

    gradient = _risk_gradient(weights.matrix, matrix_star, zero_tol=zero_tol)
    projected = np.sum(gradient * weights.assigned_lines, axis=0)
    return GradientReport(gradient=gradient, projected=projected)


def stationarity_check(weights: PNNWeights, data_model: WeightsLike, tol: float = 1e-9) -> bool:
    """Все проекции градиента на прямые по модулю не больше tol."""
    report = analytic_gradient(weights, data_model)
    return bool(np.max(np.abs(report.projected)) <= tol)


def _signed_lines(line_set: LineSet, signs: Optional[ArrayLike]) -> np.ndarray:
    if signs is None:
        return line_set.unit_vectors
    values = np.asarray(signs, dtype=float).ravel()
    if values.shape[0] != line_set.size:
        msg = f'Expected {line_set.size} line signs, got {values.shape[0]}.'
        raise DimensionMismatchError(msg)
    return line_set.unit_vectors * np.where(values < 0, -1.0, 1.0)


def _invertible_kernel(psi_LL: np.ndarray, *, pd_tol: float) -> None:
    lowest = min_eigenvalue(psi_LL)
    if lowest <= pd_tol:
        msg = f'psi[K_L] is singular (lambda_min={lowest:.3e}).'
        raise SingularKernelError(msg)


def _bad_region_blocks(
    line_set: LineSet,
    weights_star: PNNWeights,
    signs: Optional[ArrayLike],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if line_set.dim != weights_star.dim:
        msg = f'Lines live in dimension {line_set.dim}, data model in {weights_star.dim}.'
        raise DimensionMismatchError(msg)
    q_star, _ = decompose_weights(weights_star)
    signed = _signed_lines(line_set, signs)
    psi_LL = psi_apply(line_set.gram)
    psi_cross = psi_apply(cross_gram(line_set, weights_star.line_set))
    return signed, psi_LL, psi_cross @ q_star, q_star


def bad_region_z(
    line_set: LineSet,
    weights_star: PNNWeights,
    signs: ArrayLike,
    w0: Optional[ArrayLike] = None,
    *,
    rcond: float = Tolerances.PINV_RCOND,
) -> np.ndarray:
    """
    z = sum w - sum w* в стационарной точке области, где все нейроны каждой прямой одного знака:
    z = -(V V^T)^-1 V [psi B^+ V^T w0 + (psi B^+ - I) psi_x q*], V = U S, B = V^T V + psi.
    :param line_set: прямые обучаемой сети
    :param weights_star: порождающая сеть
    :param signs: знак каждой прямой (r-вектор из ±1)
    :param w0: сумма весов порождающей сети; по умолчанию вычисляется по weights_star
    :param rcond: порог псевдообращения
    :return: d-вектор z
    """
    signed, psi_LL, psi_x_q, _ = _bad_region_blocks(line_set, weights_star, signs)
    offset = weights_star.total if w0 is None else np.asarray(w0, dtype=float).ravel()
    projector = signed @ signed.T
    spectrum = scipy.linalg.eigvalsh(projector)
    if spectrum[0] <= rcond * max(spectrum[-1], 1.0):
        msg = f'U S S^T U^T is rank-deficient (lambda_min={spectrum[0]:.3e}).'
        raise SingularProjectorError(msg)

    augmented_pinv = pinv_symmetric(signed.T @ signed + psi_LL, rcond=rcond)
    inner = psi_LL @ augmented_pinv @ (signed.T @ offset) + (psi_LL @ augmented_pinv - np.eye(line_set.size)) @ psi_x_q
    return -scipy.linalg.solve(projector, signed @ inner, assume_a='pos')


@dataclass(frozen=True, eq=False)
class BadRegionPoint:
    """Решение необходимого условия стационарности в области без смешанных прямых."""

    q: np.ndarray
    z: np.ndarray

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.q >= -Tolerances.FEASIBILITY))


def bad_region_stationary_point(
    line_set: LineSet,
    weights_star: PNNWeights,
    signs: ArrayLike,
    w0: Optional[ArrayLike] = None,
    *,
    pd_tol: float = Tolerances.PD,
) -> BadRegionPoint:
    """
    Прямое решение системы S U^T z + psi q - psi_x q* = 0, z = U S q - w0 без условия на ранг U.
    """
    signed, psi_LL, psi_x_q, _ = _bad_region_blocks(line_set, weights_star, signs)
    _invertible_kernel(psi_LL, pd_tol=pd_tol)
    offset = weights_star.total if w0 is None else np.asarray(w0, dtype=float).ravel()
    q = scipy.linalg.solve(signed.T @ signed + psi_LL, signed.T @ offset + psi_x_q, assume_a='pos')
    return BadRegionPoint(q=q, z=signed @ q - offset)


def bad_region_loss(
    bundle: KernelBundle,
    line_set: LineSet,
    q_star: ArrayLike,
    *,
    signs: Optional[ArrayLike] = None,
    pd_tol: float = Tolerances.PD,
) -> float:
    """
    Риск в локальном минимуме области без смешанных прямых при w0 = 0:
    (1/4) q*^T (psi[K_L*] - psi_x^T (psi[K_L] + S U^T U S)^-1 psi_x) q*.
    :param bundle: блоки psi[K]
    :param line_set: прямые обучаемой сети
    :param q_star: массы прямых порождающей сети
    :param signs: знаки прямых, по умолчанию все +1
    :param pd_tol: порог обратимости psi[K_L]
    :return: значение риска
    """
    masses = np.asarray(q_star, dtype=float).ravel()
    _invertible_kernel(bundle.psi_LL, pd_tol=pd_tol)
    signed = _signed_lines(line_set, signs)
    augmented = bundle.psi_LL + signed.T @ signed
    reduced = bundle.psi_star - bundle.psi_cross.T @ scipy.linalg.solve(augmented, bundle.psi_cross, assume_a='pos')
    return 0.25 * float(masses @ reduced @ masses)


def bad_region_loss_from_z(
    bundle: KernelBundle,
    line_set: LineSet,
    q_star: ArrayLike,
    z: ArrayLike,
    *,
    signs: Optional[ArrayLike] = None,
    pd_tol: float = Tolerances.PD,
) -> float:
    """Тот же риск через z: (1/4) [q*^T (psi[K]/psi[K_L]) q* + z^T (I + V psi^-1 V^T) z]."""
    masses = np.asarray(q_star, dtype=float).ravel()
    offset = np.asarray(z, dtype=float).ravel()
    _invertible_kernel(bundle.psi_LL, pd_tol=pd_tol)
    signed = _signed_lines(line_set, signs)
    schur = bundle.psi_star - bundle.psi_cross.T @ scipy.linalg.solve(bundle.psi_LL, bundle.psi_cross, assume_a='pos')
    metric = np.eye(line_set.dim) + signed @ scipy.linalg.solve(bundle.psi_LL, signed.T, assume_a='pos')
    return 0.25 * (float(masses @ schur @ masses) + float(offset @ metric @ offset))


def line_gradient(
    weights: PNNWeights,
    weights_star: PNNWeights,
    *,
    bundle: Optional[KernelBundle] = None,
) -> np.ndarray:
    """
    Производные риска по знаковым длинам c_i вдоль прямых, в замкнутой форме:
    (1/2) [u_{g(i)}^T z + sign(c_i) (psi q - psi_x q*)_{g(i)}].
    :param weights: допустимые веса
    :param weights_star: порождающая сеть
    :param bundle: блоки psi[K] для этой пары наборов прямых
    :return: k-вектор производных
    """
    q, _ = decompose_weights(weights)
    q_star, _ = decompose_weights(weights_star)
    if bundle is None:
        bundle = KernelBundle.from_line_sets(weights.line_set, weights_star.line_set, check_psd=False)
    z = weights.total - weights_star.total
    per_line = weights.line_set.unit_vectors.T @ z
    kernel_part = bundle.psi_LL @ q - bundle.psi_cross @ q_star
    lines = weights.line_map.indices
    return 0.5 * (per_line[lines] + np.sign(weights.signed_magnitudes) * kernel_part[lines])
