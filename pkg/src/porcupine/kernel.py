import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from porcupine.errors import BoundViolatedError, DomainError, NotSymmetricError, ParameterOutOfRangeError
from porcupine.lines import ArrayLike, LineSet, build_line_set, cross_gram
from porcupine.settings import Tolerances

logger = logging.getLogger(__name__)


def psi(x: Union[float, ArrayLike], *, clamp_tol: float = Tolerances.CLAMP) -> Union[float, np.ndarray]:
    """
    Ядро x + (2/pi) * (sqrt(1 - x^2) - x * arccos(x)), поэлементно.
    :param x: число или массив из [-1, 1]
    :param clamp_tol: допуск выхода за [-1, 1], который считается ошибкой округления
    :return: значение ядра той же формы
    """
    values = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(values)) or np.any(np.abs(values) > 1.0 + clamp_tol):
        msg = f'psi is defined on [-1, 1], got values up to {np.max(np.abs(values)):.17g}.'
        raise DomainError(msg)

    c = np.clip(values, -1.0, 1.0)
    result = c + (2.0 / np.pi) * (np.sqrt(1.0 - c * c) - c * np.arccos(c))
    if result.ndim == 0:
        return float(result)
    return result


def psi_apply(matrix: np.ndarray, *, clamp_tol: float = Tolerances.CLAMP) -> np.ndarray:
    """Поэлементное применение psi к матрице."""
    values = np.asarray(matrix, dtype=float)
    if values.ndim != 2:
        msg = f'Expected a matrix, got an array of shape {values.shape}.'
        raise DomainError(msg)
    return np.asarray(psi(values, clamp_tol=clamp_tol))


def degree_one_kernel(d: int) -> np.ndarray:
    """Матрица C для PNN степени один: единицы на диагонали и 2/pi вне ее."""
    return np.full((d, d), 2.0 / np.pi) + (1.0 - 2.0 / np.pi) * np.eye(d)


def symmetrize(matrix: np.ndarray, *, symmetry_tol: float = Tolerances.SYMMETRY) -> np.ndarray:
    values = np.asarray(matrix, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        msg = f'Expected a square matrix, got shape {values.shape}.'
        raise NotSymmetricError(msg)

    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    asymmetry = float(np.max(np.abs(values - values.T))) if values.size else 0.0
    if asymmetry > symmetry_tol * scale:
        msg = f'Matrix asymmetry {asymmetry:.3e} exceeds tolerance {symmetry_tol:.1e}.'
        raise NotSymmetricError(msg)
    return (values + values.T) / 2


def eigenvalues(matrix: np.ndarray, *, symmetry_tol: float = Tolerances.SYMMETRY) -> np.ndarray:
    """Собственные значения симметричной матрицы по возрастанию."""
    return scipy.linalg.eigvalsh(symmetrize(matrix, symmetry_tol=symmetry_tol))


def min_eigenvalue(matrix: np.ndarray, *, symmetry_tol: float = Tolerances.SYMMETRY) -> float:
    """
    Наименьшее собственное значение по полному симметричному разложению.
    :param matrix: симметричная матрица
    :param symmetry_tol: допуск несимметричности
    :return: lambda_min
    """
    return float(eigenvalues(matrix, symmetry_tol=symmetry_tol)[0])


def spectral_norm(matrix: np.ndarray, *, symmetry_tol: float = Tolerances.SYMMETRY) -> float:
    values = eigenvalues(matrix, symmetry_tol=symmetry_tol)
    return float(max(abs(values[0]), abs(values[-1])))


def pinv_symmetric(matrix: np.ndarray, *, rcond: float = Tolerances.PINV_RCOND) -> np.ndarray:
    """
    Псевдообратная симметричной матрицы. Собственные значения ниже rcond * max|lambda| считаются нулевыми.
    """
    return scipy.linalg.pinvh(symmetrize(matrix), atol=0.0, rtol=rcond)


def equiangular_2d(r: int) -> LineSet:
    """
    Прямые на плоскости с равными углами pi / r между соседними.
    :param r: число прямых, не меньше 2
    :return: набор с A(i, j) = pi * |i - j| / r
    """
    if r < 2:
        msg = f'Equiangular construction needs r >= 2, got {r}.'
        raise ParameterOutOfRangeError(msg)

    phi = np.pi * np.arange(r) / r
    return build_line_set(np.column_stack([np.cos(phi), np.sin(phi)]))


@dataclass(frozen=True, eq=False)
class KernelBundle:
    """Блоки psi[K] для пары наборов прямых и их совместная матрица."""

    lines: LineSet
    lines_star: LineSet
    psi_LL: np.ndarray
    psi_cross: np.ndarray
    psi_star: np.ndarray
    joint: np.ndarray

    @classmethod
    def from_line_sets(
        cls,
        lines: LineSet,
        lines_star: LineSet,
        *,
        psd_tol: float = Tolerances.KERNEL_PSD,
        check_psd: bool = True,
    ) -> 'KernelBundle':
        """
        :param lines: прямые обучаемой сети
        :param lines_star: прямые сети, порождающей данные
        :param psd_tol: допуск отрицательности наименьшего собственного значения совместной матрицы
        :param check_psd: проверять ли неотрицательную определенность
        """
        psi_LL = psi_apply(lines.gram)
        psi_cross = psi_apply(cross_gram(lines, lines_star))
        psi_star = psi_apply(lines_star.gram)
        joint = np.block([[psi_LL, psi_cross], [psi_cross.T, psi_star]])
        if check_psd:
            lowest = min_eigenvalue(joint)
            if lowest < -psd_tol:
                msg = f'Joint kernel matrix has eigenvalue {lowest:.3e} below -{psd_tol:.1e}.'
                raise BoundViolatedError(msg)
        return cls(
            lines=lines,
            lines_star=lines_star,
            psi_LL=psi_LL,
            psi_cross=psi_cross,
            psi_star=psi_star,
            joint=joint,
        )

    @property
    def r(self) -> int:
        return self.lines.size

    @property
    def r_star(self) -> int:
        return self.lines_star.size

    def with_line(self, vector: ArrayLike) -> 'KernelBundle':
        """Тот же набор данных, к прямым обучаемой сети добавлена еще одна."""
        return KernelBundle.from_line_sets(self.lines.with_line(vector), self.lines_star)
