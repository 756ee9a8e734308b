from porcupine.experiments.base import Experiment
from porcupine.experiments.matched import MatchedDegreeOneExperiment, MatchedSummary, experiment_matched_degree_one
from porcupine.experiments.mismatched import (
    MismatchedRandomExperiment,
    MismatchedSummary,
    experiment_mismatched_random,
)

__all__ = [
    'Experiment',
    'MatchedDegreeOneExperiment',
    'MatchedSummary',
    'MismatchedRandomExperiment',
    'MismatchedSummary',
    'experiment_matched_degree_one',
    'experiment_mismatched_random',
]
