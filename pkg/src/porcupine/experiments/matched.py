import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from porcupine.errors import ParameterOutOfRangeError
from porcupine.experiments.base import Experiment, TrialJob
from porcupine.lines import NeuronLineMap, PNNWeights, axis_line_set
from porcupine.settings import Defaults, derive_seed
from porcupine.trainer import TrainConfig, classify_outcome, generate_dataset, sgd_train
from porcupine.types import Outcome, TrialRow, TrialRowMany

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchedSummary:
    """Доля глобальных оптимумов и пары (||W - W*||_F^2, итоговый риск) для одного k."""

    k: int
    fraction_global: float
    gaps: Tuple[float, ...]
    losses: Tuple[float, ...]
    bad_local_violations: int


class MatchedDegreeOneExperiment(Experiment):
    """
    Согласованная PNN степени один: прямые - оси координат, на каждой оси k/d нейронов.
    Порождающая сеть и начальные веса имеют гауссовские длины на той же конфигурации.
    """

    name = 'matched'

    def __init__(
        self,
        d: int,
        k_values: Sequence[int],
        trials: int,
        config: TrainConfig,
        *,
        threads: int = Defaults.THREADS,
    ) -> None:
        """
        Метод инициализации класса.
        :param d: число входов
        :param k_values: числа скрытых нейронов, каждое кратно d
        :param trials: число испытаний на каждое k
        :param config: параметры обучения
        :param threads: число потоков
        """
        super().__init__(config, threads=threads)
        bad = [k for k in k_values if k < d or k % d]
        if bad or trials < 1:
            msg = f'Every k must be a positive multiple of d={d} and trials >= 1, got k={list(k_values)}.'
            raise ParameterOutOfRangeError(msg)

        self.d = d
        self.k_values = list(k_values)
        self.trials = trials
        self._gaps: Dict[TrialJob, Tuple[float, float]] = {}

    def _jobs(self) -> List[TrialJob]:
        return [(k, trial) for k in self.k_values for trial in range(self.trials)]

    def _run_trial(self, job: TrialJob) -> TrialRowMany:
        k, trial = job
        seed = self.trial_seed(self.d, k, trial)
        rng = np.random.default_rng(seed)
        axes = axis_line_set(self.d)
        line_map = NeuronLineMap.blocks(self.d, k // self.d)
        weights_star = PNNWeights.from_magnitudes(rng.standard_normal(k), axes, line_map)
        init = PNNWeights.from_magnitudes(rng.standard_normal(k), axes, line_map)

        data = generate_dataset(weights_star, self.config.samples, derive_seed(seed, 'data'))
        result = sgd_train(data, init, self.config.replace(seed=derive_seed(seed, 'sgd')))
        report = classify_outcome(result, weights_star)
        gap = float(np.sum((result.final_weights.matrix - weights_star.matrix) ** 2))
        self._gaps[job] = (gap, report.loss)
        logger.info('Matched d=%d k=%d trial %d: %s after %d epochs', self.d, k, trial, report.outcome, result.epochs_run)
        return [
            TrialRow(
                experiment=self.name,
                d=self.d,
                k=k,
                k_star=k,
                trial=trial,
                seed=seed,
                epochs_run=result.epochs_run,
                final_train_loss=result.final_train_loss,
                normalized_test_mse=result.final_test_loss_normalized,
                outcome=str(report.outcome),
                signature_violations=report.uniform_lines,
            ),
        ]

    def summarize(self, rows: TrialRowMany) -> List[MatchedSummary]:
        """
        Сводка по каждому k.
        :param rows: строки, полученные из run
        :return: сводки в порядке k_values
        """
        summaries = []
        for k in self.k_values:
            selected = [row for row in rows if row['k'] == k]
            pairs = [self._gaps[(k, row['trial'])] for row in selected]
            is_global = [row['outcome'] == str(Outcome.GLOBAL) for row in selected]
            violations = sum(
                row['signature_violations'] > 0 for row in selected if row['outcome'] == str(Outcome.BAD_LOCAL)
            )
            summaries.append(
                MatchedSummary(
                    k=k,
                    fraction_global=float(np.mean(is_global)) if selected else 0.0,
                    gaps=tuple(gap for gap, _ in pairs),
                    losses=tuple(loss for _, loss in pairs),
                    bad_local_violations=violations,
                ),
            )
        return summaries


def experiment_matched_degree_one(
    d: int,
    k: Sequence[int],
    trials: int,
    config: Optional[TrainConfig] = None,
    *,
    threads: int = Defaults.THREADS,
) -> Tuple[List[MatchedSummary], TrialRowMany]:
    """
    Согласованный протокол для PNN степени один.
    :param d: число входов
    :param k: сетка чисел нейронов
    :param trials: число испытаний на каждое k
    :param config: параметры обучения, по умолчанию TrainConfig.matched_desk()
    :param threads: число потоков
    :return: сводки по k и строки испытаний
    """
    experiment = MatchedDegreeOneExperiment(d, k, trials, config or TrainConfig.matched_desk(), threads=threads)
    rows = experiment.run()
    return experiment.summarize(rows), rows
