from enum import Enum
from typing import Any, Dict, List

from typing_extensions import TypedDict


class LineSummary(Enum):
    """Сводка знаков нейронов одной прямой"""

    ALL_PLUS = 'all_plus'
    ALL_MINUS = 'all_minus'
    MIXED = 'mixed'

    def __str__(self) -> str:
        return self.value


class RegionLabel(Enum):
    """Метки областей ландшафта функции потерь"""

    ONLY_GLOBAL = 'OnlyGlobal'
    ONLY_BAD_LOCAL = 'OnlyBadLocal'
    NO_OPTIMA = 'NoOptima'
    MAY_HAVE_BAD_LOCAL = 'MayHaveBadLocal'
    GOOD_REGION = 'GoodRegion'

    def __str__(self) -> str:
        return self.value


class Outcome(Enum):
    """Исход одного запуска обучения"""

    GLOBAL = 'Global'
    BAD_LOCAL = 'BadLocal'
    NOT_CONVERGED = 'NotConverged'

    def __str__(self) -> str:
        return self.value


class ExperimentSpec(TypedDict):
    """Описание запуска, которое повторяется в заголовке CSV"""

    command: str
    params: Dict[str, Any]
    output: str


class SweepRow(TypedDict, total=False):
    """Строка результата перебора дополнений Шура"""

    d: int
    r_star: int
    r: int
    trial: int
    seed: int
    spectral_norm: float
    min_eig: float
    runtime_ms: float
    nearest_norm: float
    asymptotic: float


class TrialRow(TypedDict):
    """Строка результата одного испытания обучения"""

    experiment: str
    d: int
    k: int
    k_star: int
    trial: int
    seed: int
    epochs_run: int
    final_train_loss: float
    normalized_test_mse: float
    outcome: str
    signature_violations: int


SweepRowMany = List[SweepRow]
TrialRowMany = List[TrialRow]
