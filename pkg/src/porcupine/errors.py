class PorcupineError(Exception):
    """Базовое исключение библиотеки."""


class ValidationError(PorcupineError, ValueError):
    """Некорректные входные данные или конфигурация. CLI завершается с кодом 2."""


class NumericError(PorcupineError, ArithmeticError):
    """Численный сбой при корректных входных данных. CLI завершается с кодом 3."""


class ZeroVectorError(ValidationError):
    """Вектор нулевой длины там, где требуется направление."""


class DuplicateLineError(ValidationError):
    """Две прямые совпадают в пределах допуска коллинеарности."""


class DimensionMismatchError(ValidationError):
    """Размерности аргументов не согласованы."""


class InfeasibleWeightsError(ValidationError):
    """Столбец весов не лежит на назначенной ему прямой."""


class ConfigMismatchError(ValidationError):
    """Сети заданы на разных наборах прямых или разных отображениях нейронов."""


class DomainError(ValidationError):
    """Аргумент вне области определения."""


class NotSymmetricError(ValidationError):
    """Матрица несимметрична сверх допуска."""


class NegativeMassError(ValidationError):
    """Вектор масс прямых содержит отрицательные элементы."""


class PreconditionViolatedError(ValidationError):
    """Не выполнено предусловие теоремы."""


class ParameterOutOfRangeError(ValidationError):
    """Параметр вне допустимого диапазона."""


class ConfigError(ValidationError):
    """Некорректная конфигурация обучения или эксперимента."""


class TooManyCollisionsError(NumericError):
    """Не удалось набрать нужное число неколлинеарных случайных прямых."""


class ZeroColumnError(NumericError):
    """Градиент не определен в точке с нулевым столбцом весов."""


class SingularProjectorError(NumericError):
    """Матрица U S S^T U^T вырождена."""


class SingularKernelError(NumericError):
    """Ядерная матрица вырождена там, где требуется обращение."""


class SingularStructureError(NumericError):
    """Матрица вида alpha*I + beta*J необратима."""


class CoverageNotReachedError(NumericError):
    """Жадное построение сети не сошлось за отведенный бюджет случайных точек."""


class DivergedError(NumericError):
    """Функция потерь стала бесконечной или NaN."""


class BoundViolatedError(NumericError):
    """Вычисленная оценка не выполнилась численно."""
