import logging
from contextlib import suppress
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from porcupine.errors import ParameterOutOfRangeError
from porcupine.experiments.base import Experiment, TrialJob
from porcupine.lines import PNNWeights
from porcupine.settings import Defaults, derive_seed
from porcupine.trainer import TrainConfig, classify_outcome, generate_dataset, init_random_pnn, sgd_train
from porcupine.types import TrialRow, TrialRowMany

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MismatchedSummary:
    """Распределение нормированной тестовой ошибки для одного k."""

    k: int
    runs: int
    discarded: int
    minimum: float
    mean: float
    median: float
    gamma_shape: Optional[float] = None
    gamma_scale: Optional[float] = None


def _gamma_fit(values: np.ndarray) -> Tuple[Optional[float], Optional[float]]:
    positive = values[values > 0]
    if positive.size < 2 or np.ptp(positive) == 0:
        return None, None
    with suppress(ValueError, RuntimeError, FloatingPointError):
        shape, _, scale = scipy.stats.gamma.fit(positive, floc=0)
        return float(shape), float(scale)
    return None, None


class MismatchedRandomExperiment(Experiment):
    """
    PNN на случайных прямых приближает полносвязную сеть из k* нейронов. Для каждого испытания
    порождающая сеть и пары обучающих и тестовых данных общие для всех инициализаций PNN.
    """

    name = 'mismatched'

    def __init__(
        self,
        d: int,
        k_star: int,
        k_values: Sequence[int],
        trials: int,
        config: TrainConfig,
        *,
        inits: int = 10,
        threads: int = Defaults.THREADS,
    ) -> None:
        """
        Метод инициализации класса.
        :param d: число входов
        :param k_star: число нейронов порождающей сети
        :param k_values: четные числа нейронов PNN (по два нейрона на прямую)
        :param trials: число порождающих сетей на каждое k
        :param config: параметры обучения
        :param inits: число инициализаций PNN на одну порождающую сеть
        :param threads: число потоков
        """
        super().__init__(config, threads=threads)
        bad = [k for k in k_values if k < 2 or k % 2]
        if bad or trials < 1 or inits < 1 or k_star < 1:
            msg = f'Every k must be a positive even number and trials, inits, k* positive, got k={list(k_values)}.'
            raise ParameterOutOfRangeError(msg)

        self.d = d
        self.k_star = k_star
        self.k_values = list(k_values)
        self.trials = trials
        self.inits = inits
        self.discarded: Dict[TrialJob, int] = {}

    def _jobs(self) -> List[TrialJob]:
        return [(k, trial) for k in self.k_values for trial in range(self.trials)]

    def _run_trial(self, job: TrialJob) -> TrialRowMany:
        k, trial = job
        truth_seed = self.trial_seed(self.d, self.k_star, trial)
        rng = np.random.default_rng(truth_seed)
        matrix_star = rng.standard_normal((self.d, self.k_star)) / np.sqrt(self.d)
        weights_star = PNNWeights.from_unconstrained(matrix_star)
        train = generate_dataset(matrix_star, self.config.samples, derive_seed(truth_seed, 'train'))
        test = generate_dataset(matrix_star, self.config.samples, derive_seed(truth_seed, 'test'))

        rows: TrialRowMany = []
        discarded = 0
        for init_index in range(self.inits):
            seed = derive_seed(truth_seed, 'init', k, init_index)
            _, _, init = init_random_pnn(self.d, k // 2, seed)
            result = sgd_train(train, init, self.config.replace(seed=derive_seed(seed, 'sgd')), test_data=test)
            if not result.line_feasibility_ok:
                discarded += 1
                logger.warning('Discarding k=%d trial %d init %d: weights left their lines', k, trial, init_index)
                continue

            report = classify_outcome(result, weights_star)
            rows.append(
                TrialRow(
                    experiment=self.name,
                    d=self.d,
                    k=k,
                    k_star=self.k_star,
                    trial=trial * self.inits + init_index,
                    seed=seed,
                    epochs_run=result.epochs_run,
                    final_train_loss=result.final_train_loss,
                    normalized_test_mse=result.final_test_loss_normalized,
                    outcome=str(report.outcome),
                    signature_violations=report.uniform_lines,
                ),
            )
        self.discarded[job] = discarded
        logger.info('Mismatched d=%d k=%d trial %d: %d runs kept', self.d, k, trial, len(rows))
        return rows

    def summarize(self, rows: TrialRowMany) -> List[MismatchedSummary]:
        """
        Минимум, среднее, медиана и гамма-аппроксимация (loc = 0) нормированной ошибки по каждому k.
        :param rows: строки, полученные из run
        :return: сводки в порядке k_values
        """
        summaries = []
        for k in self.k_values:
            values = np.asarray([row['normalized_test_mse'] for row in rows if row['k'] == k], dtype=float)
            discarded = sum(count for (job_k, _), count in self.discarded.items() if job_k == k)
            if values.size == 0:
                summaries.append(
                    MismatchedSummary(k=k, runs=0, discarded=discarded, minimum=np.nan, mean=np.nan, median=np.nan),
                )
                continue

            shape, scale = _gamma_fit(values)
            summaries.append(
                MismatchedSummary(
                    k=k,
                    runs=int(values.size),
                    discarded=discarded,
                    minimum=float(np.min(values)),
                    mean=float(np.mean(values)),
                    median=float(np.median(values)),
                    gamma_shape=shape,
                    gamma_scale=scale,
                ),
            )
        return summaries


def experiment_mismatched_random(
    d: int,
    k_star: int,
    k_list: Sequence[int],
    trials: int,
    config: Optional[TrainConfig] = None,
    inits: int = 10,
    *,
    threads: int = Defaults.THREADS,
) -> Tuple[List[MismatchedSummary], TrialRowMany]:
    """
    Протокол со случайными прямыми и полносвязной порождающей сетью с весами N(0, 1/d).
    :param d: число входов
    :param k_star: число нейронов порождающей сети
    :param k_list: сетка чисел нейронов PNN
    :param trials: число порождающих сетей на каждое k
    :param config: параметры обучения, по умолчанию TrainConfig.mismatched_desk()
    :param inits: число инициализаций на каждую порождающую сеть
    :param threads: число потоков
    :return: сводки по k и строки запусков
    """
    experiment = MismatchedRandomExperiment(
        d,
        k_star,
        k_list,
        trials,
        config or TrainConfig.mismatched_desk(),
        inits=inits,
        threads=threads,
    )
    rows = experiment.run()
    return experiment.summarize(rows), rows
