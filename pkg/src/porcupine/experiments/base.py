import logging
from abc import ABCMeta, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import List, Tuple

from porcupine.settings import Defaults, SeedKey, derive_seed
from porcupine.trainer import TrainConfig
from porcupine.types import TrialRow, TrialRowMany

logger = logging.getLogger(__name__)

TrialJob = Tuple[int, int]


class Experiment(metaclass=ABCMeta):
    """Серия испытаний обучения с независимыми seed для каждого испытания."""

    name = ''

    def __init__(self, config: TrainConfig, *, threads: int = Defaults.THREADS) -> None:
        """
        Метод инициализации класса.
        :param config: параметры обучения; config.seed служит главным seed серии
        :param threads: число потоков для испытаний
        """
        self.config = config
        self.threads = threads

    def trial_seed(self, *keys: SeedKey) -> int:
        return derive_seed(self.config.seed, self.name, *keys)

    @abstractmethod
    def _jobs(self) -> List[TrialJob]:
        """
        Список испытаний в порядке вывода.
        :return: пары (число нейронов, номер испытания)
        """
        raise NotImplementedError()

    @abstractmethod
    def _run_trial(self, job: TrialJob) -> TrialRowMany:
        """
        Выполнить одно испытание.
        :param job: пара (число нейронов, номер испытания)
        :return: строки результата
        """
        raise NotImplementedError()

    def run(self) -> TrialRowMany:
        """
        Выполнить все испытания. Порядок строк не зависит от числа потоков.
        :return: строки результата
        """
        jobs = self._jobs()
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                parts = list(executor.map(self._run_trial, jobs))
        else:
            parts = [self._run_trial(job) for job in jobs]

        rows: List[TrialRow] = [row for part in parts for row in part]
        logger.info('Experiment %s finished: %d trials, %d rows', self.name, len(jobs), len(rows))
        return rows
