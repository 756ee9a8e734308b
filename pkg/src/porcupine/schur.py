import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg

from porcupine.errors import (
    BoundViolatedError,
    DuplicateLineError,
    NegativeMassError,
    ParameterOutOfRangeError,
    PreconditionViolatedError,
    SingularKernelError,
    SingularStructureError,
)
from porcupine.kernel import KernelBundle, eigenvalues, min_eigenvalue, pinv_symmetric, psi
from porcupine.lines import ArrayLike, LineSet, canonicalize_vector, cross_gram, random_line_set
from porcupine.settings import Defaults, Tolerances, derive_seed
from porcupine.types import SweepRow, SweepRowMany

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SchurReport:
    """Обобщенное дополнение Шура psi[K]/psi[K_L] и его спектральные характеристики."""

    schur: np.ndarray
    spectral_norm: float
    min_eigenvalue: float

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'SchurReport':
        symmetric = (matrix + matrix.T) / 2
        spectrum = eigenvalues(symmetric)
        return cls(
            schur=symmetric,
            spectral_norm=float(max(abs(spectrum[0]), abs(spectrum[-1]))),
            min_eigenvalue=float(spectrum[0]),
        )

    def loss_at_good_local(self, q_star: ArrayLike) -> float:
        masses = np.asarray(q_star, dtype=float).ravel()
        return 0.25 * float(masses @ self.schur @ masses)


def schur_complement(bundle: KernelBundle, *, rcond: float = Tolerances.PINV_RCOND) -> SchurReport:
    """
    psi[K_L*] - psi[K_L,L*]^T psi[K_L]^+ psi[K_L,L*].
    :param bundle: блоки ядра
    :param rcond: порог псевдообращения
    :return: отчет о дополнении Шура
    """
    pinv = pinv_symmetric(bundle.psi_LL, rcond=rcond)
    return SchurReport.from_matrix(bundle.psi_star - bundle.psi_cross.T @ pinv @ bundle.psi_cross)


def good_local_loss(report: SchurReport, q_star: ArrayLike) -> Tuple[float, float]:
    """
    Риск в хорошем локальном оптимуме и его оценка через спектральную норму.
    :return: (точное значение, верхняя оценка)
    """
    masses = np.asarray(q_star, dtype=float).ravel()
    if np.any(masses < 0):
        msg = 'Line masses q* must be non-negative.'
        raise NegativeMassError(msg)
    return report.loss_at_good_local(masses), 0.25 * float(masses @ masses) * report.spectral_norm


def add_line_update(
    report: SchurReport,
    bundle: KernelBundle,
    new_line: ArrayLike,
    *,
    collinearity_tol: float = Tolerances.COLLINEARITY,
    pd_tol: float = Tolerances.PD,
) -> Tuple[SchurReport, float, np.ndarray]:
    """
    Ранг-один обновление дополнения Шура при добавлении прямой к L:
    new = old - alpha v v^T, alpha = (1 - psi[z1]^T psi[K_L]^-1 psi[z1])^-1,
    v = psi[z2] - psi[K_L,L*]^T psi[K_L]^-1 psi[z1].
    :param report: текущее дополнение Шура
    :param bundle: текущие блоки ядра
    :param new_line: направление новой прямой
    :return: новый отчет, alpha и v
    """
    unit, _ = canonicalize_vector(new_line)
    overlap = np.abs(bundle.lines.unit_vectors.T @ unit)
    if np.max(overlap) >= 1.0 - collinearity_tol:
        msg = f'New line duplicates line {int(np.argmax(overlap))}.'
        raise DuplicateLineError(msg)

    lowest = min_eigenvalue(bundle.psi_LL)
    if lowest <= pd_tol:
        msg = f'psi[K_L] is singular (lambda_min={lowest:.3e}).'
        raise SingularKernelError(msg)

    psi_z1 = np.asarray(psi(np.clip(bundle.lines.unit_vectors.T @ unit, -1.0, 1.0)))
    psi_z2 = np.asarray(psi(np.clip(bundle.lines_star.unit_vectors.T @ unit, -1.0, 1.0)))
    solved = scipy.linalg.solve(bundle.psi_LL, psi_z1, assume_a='pos')
    denominator = 1.0 - float(psi_z1 @ solved)
    if denominator <= pd_tol:
        msg = f'Augmented kernel is singular (pivot {denominator:.3e}).'
        raise SingularKernelError(msg)

    alpha = 1.0 / denominator
    v = psi_z2 - bundle.psi_cross.T @ solved
    return SchurReport.from_matrix(report.schur - alpha * np.outer(v, v)), alpha, v


def nearest_line_indices(lines: LineSet, lines_star: LineSet) -> Tuple[List[int], int]:
    """
    Для каждой прямой L* по порядку выбирает ближайшую еще не выбранную прямую из L.
    :return: индексы выбранных прямых и число случаев, когда ближайшая была уже занята
    """
    if lines.size < lines_star.size:
        msg = f'Need at least r*={lines_star.size} lines, got r={lines.size}.'
        raise ParameterOutOfRangeError(msg)

    closeness = np.abs(cross_gram(lines_star, lines))
    chosen: List[int] = []
    excluded = 0
    for i in range(lines_star.size):
        order = np.argsort(-closeness[i], kind='stable')
        if order[0] in chosen:
            excluded += 1
        chosen.append(int(next(j for j in order if j not in chosen)))
    if excluded:
        logger.debug('Nearest-line selection skipped %d already chosen lines', excluded)
    return chosen, excluded


def nearest_line_subset(lines: LineSet, lines_star: LineSet) -> LineSet:
    """Подмножество L из r* прямых, ближайших к прямым L* (с учетом обеих ориентаций)."""
    chosen, _ = nearest_line_indices(lines, lines_star)
    return lines.subset(chosen)


@dataclass(frozen=True, eq=False)
class AsymptoticReference:
    matrix: np.ndarray
    limit: float
    eigenpairs: Tuple[Tuple[float, int], ...]


def asymptotic_reference(d: int, r: int, r_star: int) -> AsymptoticReference:
    """
    Предельная матрица R = (2/pi + 1/(pi d)) 11^T + (1 - 2/pi) I, ее спектр и предел
    (1 + r*/r)(1 - 2/pi) нормы дополнения Шура.
    """
    if min(d, r, r_star) < 1:
        msg = f'd, r and r* must be positive, got d={d}, r={r}, r*={r_star}.'
        raise ParameterOutOfRangeError(msg)

    base = 1.0 - 2.0 / np.pi
    matrix = (2.0 / np.pi + 1.0 / (np.pi * d)) * np.ones((r, r)) + base * np.eye(r)
    gamma = r / d
    pairs: List[Tuple[float, int]] = []
    if r > 1:
        pairs.append((base, r - 1))
    pairs.append(((2.0 / np.pi) * r + base + gamma / np.pi, 1))
    return AsymptoticReference(matrix=matrix, limit=normalized_loss_bound(r, r_star), eigenpairs=tuple(pairs))


@dataclass(frozen=True)
class PerturbationReport:
    bound: float
    schur_norm: float
    frobenius: float


def perturbation_bound(lines: LineSet, lines_star: LineSet, delta: float) -> PerturbationReport:
    """
    Оценка (1 + 2r/delta) ||Z||_F^2 + 4 sqrt(r) ||Z||_F нормы дополнения Шура для Z = U - U*.
    :param lines: прямые L
    :param lines_star: прямые L*, в том же порядке
    :param delta: нижняя граница спектра psi[K_L*]
    :return: оценка, фактическая норма и ||Z||_F
    """
    r = lines.size
    if r != lines_star.size:
        msg = f'Perturbation bound needs r = r*, got {r} and {lines_star.size}.'
        raise PreconditionViolatedError(msg)

    frobenius = float(np.linalg.norm(lines.unit_vectors - lines_star.unit_vectors))
    lowest = min_eigenvalue(KernelBundle.from_line_sets(lines_star, lines_star, check_psd=False).psi_LL)
    if lowest < delta:
        msg = f'lambda_min(psi[K_L*])={lowest:.3e} is below delta={delta:.3e}.'
        raise PreconditionViolatedError(msg)

    if 2.0 * np.sqrt(r) * frobenius + frobenius**2 > delta / 2:
        msg = f'Perturbation ||Z||_F={frobenius:.3e} violates 2 sqrt(r)||Z|| + ||Z||^2 <= delta/2.'
        raise PreconditionViolatedError(msg)

    bound = (1.0 + 2.0 * r / delta) * frobenius**2 + 4.0 * np.sqrt(r) * frobenius
    norm = schur_complement(KernelBundle.from_line_sets(lines, lines_star)).spectral_norm
    if norm > bound + Tolerances.PINV_RCOND:
        msg = f'Schur norm {norm:.3e} exceeds perturbation bound {bound:.3e}.'
        raise BoundViolatedError(msg)
    return PerturbationReport(bound=float(bound), schur_norm=norm, frobenius=frobenius)


def normalized_loss_bound(r: int, r_star: int) -> float:
    """Асимптотическая оценка L(W*) / L(W = 0): (1 + r*/r)(1 - 2/pi)."""
    return (1.0 + r_star / r) * (1.0 - 2.0 / np.pi)


@dataclass(frozen=True)
class BadLocalBound:
    coefficient: float
    in_regime: bool


def bad_local_asymptotic_bound(gamma: float, r: int, r_star: int, mu: float) -> BadLocalBound:
    """
    Коэффициент при ||q*||^2 в асимптотической оценке риска плохого локального минимума:
    (1/4)(1 - 2/pi + (1 + sqrt(gamma) + mu)^2 r*/r).
    Флаг in_regime фиксирует, выполнено ли r* > d + 1 при d = r / gamma.
    """
    if gamma <= 1.0 or mu <= 1.0:
        msg = f'Bound requires gamma > 1 and mu > 1, got gamma={gamma}, mu={mu}.'
        raise ParameterOutOfRangeError(msg)
    if r < 1 or r_star < 0:
        msg = f'Invalid line counts r={r}, r*={r_star}.'
        raise ParameterOutOfRangeError(msg)

    coefficient = 0.25 * (1.0 - 2.0 / np.pi + (1.0 + np.sqrt(gamma) + mu) ** 2 * r_star / r)
    return BadLocalBound(coefficient=float(coefficient), in_regime=r_star > r / gamma + 1)


def structured_inverse(alpha: float, beta: float, n: int) -> Tuple[float, float]:
    """
    (alpha I + beta J)^-1 = alpha2 I + beta2 J, где J - матрица из единиц размера n.
    """
    if alpha == 0.0 or alpha + beta * n == 0.0:
        msg = f'alpha I + beta J is singular for alpha={alpha}, beta={beta}, n={n}.'
        raise SingularStructureError(msg)
    return 1.0 / alpha, -beta / (alpha**2 + alpha * beta * n)


def _sweep_trial(
    d: int,
    r_star: int,
    r: int,
    trial: int,
    master_seed: int,
    *,
    nearest: bool,
    asymptotic: bool,
    timing: bool,
) -> SweepRow:
    seed = derive_seed(master_seed, 'schur', d, r_star, r, trial)
    started = time.perf_counter()
    lines_star = random_line_set(d, r_star, derive_seed(seed, 'star'))
    lines = random_line_set(d, r, derive_seed(seed, 'lines'))
    report = schur_complement(KernelBundle.from_line_sets(lines, lines_star))
    row = SweepRow(
        d=d,
        r_star=r_star,
        r=r,
        trial=trial,
        seed=seed,
        spectral_norm=report.spectral_norm,
        min_eig=report.min_eigenvalue,
    )
    if nearest:
        subset = nearest_line_subset(lines, lines_star)
        row['nearest_norm'] = schur_complement(KernelBundle.from_line_sets(subset, lines_star)).spectral_norm
    if asymptotic:
        row['asymptotic'] = normalized_loss_bound(r, r_star)
    row['runtime_ms'] = (time.perf_counter() - started) * 1000.0 if timing else 0.0
    return row


def schur_sweep(
    d: int,
    r_star: int,
    r_grid: Sequence[int],
    trials: int,
    seed: int = Defaults.SEED,
    *,
    nearest: bool = False,
    asymptotic: bool = False,
    timing: bool = False,
    threads: int = Defaults.THREADS,
) -> SweepRowMany:
    """
    Перебор сетки r со случайными наборами прямых: по строке на (r, испытание).
    :param d: размерность
    :param r_star: число прямых порождающей сети
    :param r_grid: значения r
    :param trials: число испытаний на каждое r
    :param seed: главный seed
    :param nearest: добавить норму для подмножества ближайших прямых
    :param asymptotic: добавить асимптотический предел
    :param timing: заполнять время счета (иначе 0, чтобы вывод был воспроизводим)
    :param threads: число потоков по испытаниям
    :return: строки результата в порядке сетки
    """
    if not r_grid or trials < 1:
        msg = 'Sweep needs a non-empty r grid and at least one trial.'
        raise ParameterOutOfRangeError(msg)

    jobs = [(r, trial) for r in r_grid for trial in range(trials)]

    def run(job: Tuple[int, int]) -> SweepRow:
        return _sweep_trial(
            d,
            r_star,
            job[0],
            job[1],
            seed,
            nearest=nearest,
            asymptotic=asymptotic,
            timing=timing,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            rows = list(executor.map(run, jobs))
    else:
        rows = [run(job) for job in jobs]
    logger.info('Schur sweep finished: d=%d, r*=%d, %d rows', d, r_star, len(rows))
    return rows
