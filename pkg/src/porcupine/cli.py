import argparse
import itertools
import logging
import sys
from contextlib import contextmanager
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from porcupine import __version__
from porcupine.errors import NumericError, ParameterOutOfRangeError, ValidationError
from porcupine.experiments import experiment_matched_degree_one, experiment_mismatched_random
from porcupine.kernel import equiangular_2d, min_eigenvalue, psi_apply
from porcupine.landscape import classify_region, good_region_probability, scalar_region_classify
from porcupine.lines import (
    LineSet,
    NeuronLineMap,
    PNNWeights,
    RegionSignature,
    random_line_set,
    read_line_set,
    scalar_weights,
    write_line_set,
)
from porcupine.minimax import (
    greedy_angular_net,
    minimax_risk_bound,
    net_coverage,
    net_size_bound,
    sparse_lines_bound,
    sparse_net_size,
)
from porcupine.reporting import make_spec, write_header, write_rows
from porcupine.risk import matched_risk, mismatched_risk, monte_carlo_risk
from porcupine.schur import asymptotic_reference, bad_local_asymptotic_bound, schur_sweep
from porcupine.settings import Defaults, derive_seed, make_rng
from porcupine.trainer import TrainConfig
from porcupine.types import ExperimentSpec

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]
Instance = Tuple[str, PNNWeights, PNNWeights]

SCALAR_TRUTHS = ((6.0, 4.0), (6.0, -4.0))
SCALAR_POINTS = ((6.0, 4.0), (6.0, -4.0), (5.0, 5.0), (3.0, -3.0), (0.0, 0.0))
SWEEP_COLUMNS = ['d', 'r_star', 'r', 'trial', 'seed', 'spectral_norm', 'min_eig', 'runtime_ms']
TRIAL_COLUMNS = [
    'experiment',
    'd',
    'k',
    'k_star',
    'trial',
    'seed',
    'epochs_run',
    'final_train_loss',
    'normalized_test_mse',
    'outcome',
    'signature_violations',
]


def _int_list(text: str) -> List[int]:
    try:
        values = [int(item) for item in text.split(',') if item.strip()]
    except ValueError as error:
        msg = f'expected comma-separated integers, got {text!r}'
        raise argparse.ArgumentTypeError(msg) from error
    if not values:
        msg = 'expected at least one value'
        raise argparse.ArgumentTypeError(msg)
    return values


def _float_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(',') if item.strip()]
    except ValueError as error:
        msg = f'expected comma-separated numbers, got {text!r}'
        raise argparse.ArgumentTypeError(msg) from error
    if not values:
        msg = 'expected at least one value'
        raise argparse.ArgumentTypeError(msg)
    return values


def _add_global_flags(parser: argparse.ArgumentParser, *, suppress: bool) -> None:
    """
    Общие флаги. В подкомандах значения по умолчанию подавляются, чтобы флаг,
    указанный до подкоманды, не перезаписывался.
    """

    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    parser.add_argument('--seed', type=int, default=default(Defaults.SEED), help='master seed')
    parser.add_argument('--out', default=default('-'), help='output CSV path, "-" for stdout')
    parser.add_argument('--threads', type=int, default=default(Defaults.THREADS), help='worker threads')
    parser.add_argument(
        '--mc-samples',
        type=int,
        default=default(Defaults.MC_SAMPLES),
        dest='mc_samples',
        help='Monte Carlo sample count',
    )
    parser.add_argument('--verbose', action='store_true', default=default(False), help='debug logging to stderr')


@contextmanager
def _output(path: str) -> Iterator[TextIO]:
    if path == '-':
        yield sys.stdout
        return
    with open(path, 'w', newline='', encoding='utf-8') as stream:
        yield stream


def _spec(args: argparse.Namespace, command: str, params: Dict[str, Any]) -> ExperimentSpec:
    return make_spec(command, {**params, 'threads': args.threads, 'mc_samples': args.mc_samples}, args.out)


def _scalar_instances() -> List[Instance]:
    return [
        (f'w*={truth[0]:g},{truth[1]:g};w={point[0]:g},{point[1]:g}', scalar_weights(point), scalar_weights(truth))
        for truth in SCALAR_TRUTHS
        for point in SCALAR_POINTS
    ]


def _random_weights(line_set: LineSet, k: int, rng: np.random.Generator) -> PNNWeights:
    line_map = NeuronLineMap.round_robin(k, line_set.size)
    return PNNWeights.from_magnitudes(rng.standard_normal(k), line_set, line_map)


def _random_instances(args: argparse.Namespace) -> List[Instance]:
    rng = make_rng(args.seed, 'risk', 'demo')
    lines = random_line_set(args.d, args.r, derive_seed(args.seed, 'risk', 'lines'))
    if args.mismatched:
        lines_star = random_line_set(args.d, args.r_star, derive_seed(args.seed, 'risk', 'lines_star'))
        k_star = max(args.r_star, args.k)
    else:
        lines_star, k_star = lines, args.k

    weights = _random_weights(lines, args.k, rng)
    weights_star = _random_weights(lines_star, k_star, rng)
    if args.demo == 'identity':
        return [('identity', weights_star, weights_star)]
    return [('random', weights, weights_star)]


def _file_instances(args: argparse.Namespace) -> List[Instance]:
    with open(args.lines, encoding='utf-8') as stream:
        lines = read_line_set(stream)
    lines_star = lines
    if args.lines_star:
        with open(args.lines_star, encoding='utf-8') as stream:
            lines_star = read_line_set(stream)
    rng = make_rng(args.seed, 'risk', 'file')
    weights = _random_weights(lines, max(args.k, lines.size), rng)
    weights_star = _random_weights(lines_star, max(args.k, lines_star.size), rng)
    return [(args.lines, weights, weights_star)]


def _risk_mode(args: argparse.Namespace) -> str:
    """Явный режим из флагов; без флагов режим выбирается по конфигурациям пары сетей."""
    if args.matched:
        return 'matched'
    if args.mismatched:
        return 'mismatched'
    return 'auto'


def cmd_risk(args: argparse.Namespace) -> int:
    """Разложение риска в замкнутой форме и, с --mc, оценка Монте-Карло."""
    if args.lines:
        instances = _file_instances(args)
    elif args.demo == 'scalar':
        instances = _scalar_instances()
    else:
        instances = _random_instances(args)

    mode = _risk_mode(args)
    rows = []
    for index, (name, weights, weights_star) in enumerate(instances):
        if mode == 'mismatched' or (mode == 'auto' and not weights.same_config(weights_star)):
            breakdown = mismatched_risk(weights, weights_star)
        else:
            breakdown = matched_risk(weights, weights_star)
        row: Dict[str, Any] = {
            'instance': name,
            'linear_term': breakdown.linear_term,
            'kernel_term': breakdown.kernel_term,
            'total': breakdown.reported_total,
        }
        if args.mc:
            row['mc_mean'], row['mc_stderr'] = monte_carlo_risk(
                weights,
                weights_star,
                n_samples=args.mc_samples,
                seed=derive_seed(args.seed, 'risk', 'mc', index),
                threads=args.threads,
            )
        rows.append(row)

    columns = ['instance', 'linear_term', 'kernel_term', 'total'] + (['mc_mean', 'mc_stderr'] if args.mc else [])
    params = {'mode': mode, 'demo': args.demo, 'mc': args.mc}
    with _output(args.out) as stream:
        write_rows(_spec(args, 'risk', params), args.seed, columns, rows, stream)
    return 0


def _parse_signs(text: str) -> List[List[int]]:
    groups = [group.strip() for group in text.split(',') if group.strip()]
    if not groups or any(set(group) - {'+', '-'} for group in groups):
        msg = f'Signs must be groups of "+" and "-" separated by commas, got {text!r}.'
        raise ParameterOutOfRangeError(msg)
    return [[1 if char == '+' else -1 for char in group] for group in groups]


def cmd_landscape(args: argparse.Namespace) -> int:
    """Классификация областей, вероятность хорошей области и равноугольные прямые на плоскости."""
    rows: List[Dict[str, Any]] = []
    if args.action == 'classify' and args.scalar:
        w_star = np.asarray(args.w_star, dtype=float)
        k = args.k or w_star.shape[0]
        columns = ['region', 'label', 'witness']
        for signs in itertools.product((1, -1), repeat=k):
            result = scalar_region_classify(signs, w_star)
            region = ''.join('+' if sign > 0 else '-' for sign in signs)
            rows.append({'region': region, 'label': str(result.label), 'witness': ' '.join(map(str, result.witness))})
        params: Dict[str, Any] = {'action': 'classify', 'scalar': True, 'w_star': args.w_star, 'k': k}
    elif args.action == 'classify':
        groups = _parse_signs(args.signs or '')
        assignment = [line for line, group in enumerate(groups) for _ in group]
        line_map = NeuronLineMap(assignment=tuple(assignment), num_lines=len(groups))
        signature = RegionSignature.from_signs([sign for group in groups for sign in group], line_map)
        result = classify_region(signature, args.d)
        columns = ['signs', 'mixed_lines', 'label', 'witness']
        rows.append(
            {
                'signs': args.signs,
                'mixed_lines': signature.mixed_count,
                'label': str(result.label),
                'witness': ' '.join(map(str, result.witness)),
            },
        )
        params = {'action': 'classify', 'd': args.d, 'signs': args.signs}
    elif args.action == 'probability':
        columns = ['d', 'r', 't', 'probability']
        rows.append({'d': args.d, 'r': args.r, 't': args.t, 'probability': good_region_probability(args.d, args.r, args.t)})
        params = {'action': 'probability', 'd': args.d, 'r': args.r, 't': args.t}
    else:
        columns = ['r', 'min_eig']
        for r in args.r_grid:
            rows.append({'r': r, 'min_eig': min_eigenvalue(psi_apply(equiangular_2d(r).gram))})
        params = {'action': 'equiangular', 'r': args.r_grid}

    with _output(args.out) as stream:
        write_rows(_spec(args, 'landscape', params), args.seed, columns, rows, stream)
    return 0


def cmd_schur_sweep(args: argparse.Namespace) -> int:
    """Спектральные нормы дополнений Шура для сетки r."""
    rows = schur_sweep(
        args.d,
        args.r_star,
        args.r,
        args.trials,
        args.seed,
        nearest=args.nearest,
        asymptotic=args.asymptotic,
        timing=args.timing,
        threads=args.threads,
    )
    columns = SWEEP_COLUMNS + (['nearest_norm'] if args.nearest else []) + (['asymptotic'] if args.asymptotic else [])
    params = {
        'd': args.d,
        'r_star': args.r_star,
        'r': args.r,
        'trials': args.trials,
        'nearest': args.nearest,
        'asymptotic': args.asymptotic,
        'timing': args.timing,
    }
    with _output(args.out) as stream:
        write_rows(_spec(args, 'schur-sweep', params), args.seed, columns, rows, stream)
    return 0


def cmd_asymptotic(args: argparse.Namespace) -> int:
    """Предельная матрица, ее спектр и асимптотические оценки риска."""
    reference = asymptotic_reference(args.d, args.r, args.r_star)
    rows: List[Dict[str, Any]] = [{'quantity': 'limit', 'value': reference.limit, 'multiplicity': ''}]
    rows.extend({'quantity': 'eigenvalue', 'value': value, 'multiplicity': count} for value, count in reference.eigenpairs)
    gamma = args.r / args.d
    if args.mu is not None and gamma > 1:
        bound = bad_local_asymptotic_bound(gamma, args.r, args.r_star, args.mu)
        rows.append({'quantity': 'bad_local_coefficient', 'value': bound.coefficient, 'multiplicity': ''})
        rows.append({'quantity': 'in_regime', 'value': bound.in_regime, 'multiplicity': ''})

    params = {'d': args.d, 'r': args.r, 'r_star': args.r_star, 'mu': args.mu}
    with _output(args.out) as stream:
        write_rows(_spec(args, 'asymptotic', params), args.seed, ['quantity', 'value', 'multiplicity'], rows, stream)
    return 0


def _train_config(args: argparse.Namespace) -> TrainConfig:
    matched = args.protocol == 'matched'
    if args.paper_scale:
        config = TrainConfig.paper_scale(matched=matched)
    else:
        config = TrainConfig.matched_desk() if matched else TrainConfig.mismatched_desk()

    overrides = {
        'epochs': args.epochs,
        'samples': args.samples,
        'batch_size': args.batch_size,
        'learning_rate': args.learning_rate,
        'momentum': args.momentum,
    }
    return config.replace(seed=args.seed, **{name: value for name, value in overrides.items() if value is not None})


def cmd_train(args: argparse.Namespace) -> int:
    """Согласованный и несогласованный протоколы обучения."""
    config = _train_config(args)
    params: Dict[str, Any] = {'protocol': args.protocol, 'd': args.d, 'k': args.k, 'trials': args.trials}
    params.update({'epochs': config.epochs, 'samples': config.samples, 'learning_rate': config.learning_rate})
    if args.protocol == 'matched':
        summaries, rows = experiment_matched_degree_one(args.d, args.k, args.trials, config, threads=args.threads)
        summary_columns = ['k', 'fraction_global', 'bad_local_violations']
        summary_rows = [
            {'k': item.k, 'fraction_global': item.fraction_global, 'bad_local_violations': item.bad_local_violations}
            for item in summaries
        ]
    else:
        params.update({'k_star': args.k_star, 'inits': args.inits})
        summaries_mm, rows = experiment_mismatched_random(
            args.d,
            args.k_star,
            args.k,
            args.trials,
            config,
            args.inits,
            threads=args.threads,
        )
        summary_columns = ['k', 'runs', 'discarded', 'min', 'mean', 'median', 'gamma_shape', 'gamma_scale']
        summary_rows = [
            {
                'k': item.k,
                'runs': item.runs,
                'discarded': item.discarded,
                'min': item.minimum,
                'mean': item.mean,
                'median': item.median,
                'gamma_shape': item.gamma_shape,
                'gamma_scale': item.gamma_scale,
            }
            for item in summaries_mm
        ]

    spec = _spec(args, 'train', {**params, 'summary': args.summary})
    with _output(args.out) as stream:
        if args.summary:
            write_rows(spec, args.seed, summary_columns, summary_rows, stream)
        else:
            write_rows(spec, args.seed, TRIAL_COLUMNS, rows, stream)
    return 0


def cmd_minimax(args: argparse.Namespace) -> int:
    """Оценки размеров угловых сетей и минимаксного риска; построение сети."""
    if args.action == 'net':
        net = greedy_angular_net(args.d, args.delta, derive_seed(args.seed, 'net'))
        gap = net_coverage(net, seed=derive_seed(args.seed, 'net', 'coverage'))
        logger.info('Angular net: %d vectors, empirical gap %.6f', net.size, gap)
        spec = _spec(args, 'minimax', {'action': 'net', 'd': args.d, 'delta': args.delta})
        with _output(args.out) as stream:
            write_header(spec, args.seed, stream)
            stream.write(f'# size={net.size} gap={gap!r}\n')
            write_line_set(net.as_line_set(), stream)
        return 0

    rows: List[Dict[str, Any]] = [
        {'quantity': 'net_size_bound', 'value': net_size_bound(args.d, args.delta)},
        {'quantity': 'sparse_net_size', 'value': sparse_net_size(args.d, args.s, args.delta)},
        {'quantity': 'sparse_net_size_known', 'value': sparse_net_size(args.d, args.s, args.delta, args.k)},
        {'quantity': 'minimax_risk_bound', 'value': minimax_risk_bound(args.k, args.M, args.d, args.delta)},
    ]
    if args.risk is not None:
        for known in (False, True):
            rows.append(
                {
                    'quantity': 'sparse_lines_bound_known' if known else 'sparse_lines_bound',
                    'value': sparse_lines_bound(args.d, args.s, args.k, args.M, args.risk, known_patterns=known),
                },
            )
    params = {'action': 'bound', 'd': args.d, 's': args.s, 'delta': args.delta, 'k': args.k, 'M': args.M}
    with _output(args.out) as stream:
        write_rows(_spec(args, 'minimax', {**params, 'risk': args.risk}), args.seed, ['quantity', 'value'], rows, stream)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='porcupine', description='Porcupine neural network experiments.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    _add_global_flags(parser, suppress=False)
    commands = parser.add_subparsers(dest='command', required=True)

    def command(name: str, handler: Handler, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        _add_global_flags(sub, suppress=True)
        sub.set_defaults(handler=handler)
        return sub

    risk = command('risk', cmd_risk, 'closed-form population risk')
    mode = risk.add_mutually_exclusive_group()
    mode.add_argument('--matched', action='store_true')
    mode.add_argument('--mismatched', action='store_true')
    risk.add_argument('--demo', choices=['scalar', 'random', 'identity'], default='scalar')
    risk.add_argument('--mc', action='store_true', help='add a Monte Carlo estimate')
    risk.add_argument('--d', type=int, default=4)
    risk.add_argument('--r', type=int, default=3)
    risk.add_argument('--r-star', type=int, default=2, dest='r_star')
    risk.add_argument('--k', type=int, default=6)
    risk.add_argument('--lines', help='line set CSV of the trained network')
    risk.add_argument('--lines-star', dest='lines_star', help='line set CSV of the data network')

    landscape = command('landscape', cmd_landscape, 'region classification')
    landscape.add_argument('action', choices=['classify', 'probability', 'equiangular'])
    landscape.add_argument('--scalar', action='store_true')
    landscape.add_argument('--w-star', type=_float_list, dest='w_star', default=[6.0, -4.0])
    landscape.add_argument('--k', type=int, default=None)
    landscape.add_argument('--signs', help='per-line neuron signs, e.g. "+-,++,-"')
    landscape.add_argument('--d', type=int, default=2)
    landscape.add_argument('--r', type=int, default=10)
    landscape.add_argument('--t', type=int, default=2)
    landscape.add_argument('--r-grid', type=_int_list, dest='r_grid', default=[2, 4, 8, 16, 32, 64])

    sweep = command('schur-sweep', cmd_schur_sweep, 'Schur complement norms over random line sets')
    sweep.add_argument('--d', type=int, required=True)
    sweep.add_argument('--r-star', type=int, required=True, dest='r_star')
    sweep.add_argument('--r', type=_int_list, required=True)
    sweep.add_argument('--trials', type=int, default=10)
    sweep.add_argument('--nearest', action='store_true')
    sweep.add_argument('--asymptotic', action='store_true')
    sweep.add_argument('--timing', action='store_true')

    asymptotic = command('asymptotic', cmd_asymptotic, 'high-dimensional reference values')
    asymptotic.add_argument('--d', type=int, required=True)
    asymptotic.add_argument('--r', type=int, required=True)
    asymptotic.add_argument('--r-star', type=int, required=True, dest='r_star')
    asymptotic.add_argument('--mu', type=float, default=None)

    train = command('train', cmd_train, 'SGD training protocols')
    train.add_argument('protocol', choices=['matched', 'mismatched'])
    train.add_argument('--d', type=int, default=5)
    train.add_argument('--k', type=_int_list, default=[10, 15, 20, 25, 50])
    train.add_argument('--k-star', type=int, default=20, dest='k_star')
    train.add_argument('--trials', type=int, default=20)
    train.add_argument('--inits', type=int, default=10)
    train.add_argument('--epochs', type=int, default=None)
    train.add_argument('--samples', type=int, default=None)
    train.add_argument('--batch-size', type=int, default=None, dest='batch_size')
    train.add_argument('--learning-rate', type=float, default=None, dest='learning_rate')
    train.add_argument('--momentum', type=float, default=None)
    train.add_argument('--paper-scale', action='store_true', dest='paper_scale')
    train.add_argument('--summary', action='store_true', help='write the per-k summary instead of trial rows')

    minimax = command('minimax', cmd_minimax, 'angular nets and minimax bounds')
    minimax.add_argument('action', choices=['bound', 'net'])
    minimax.add_argument('--d', type=int, default=3)
    minimax.add_argument('--s', type=int, default=1)
    minimax.add_argument('--delta', type=float, default=0.3)
    minimax.add_argument('--k', type=int, default=1)
    minimax.add_argument('--M', type=float, default=1.0)
    minimax.add_argument('--risk', type=float, default=None)
    return parser


def _configure_logging(*, verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа. Коды выхода: 0 - успех, 2 - ошибка проверки входных данных, 3 - численная ошибка.
    :param argv: аргументы командной строки без имени программы
    :return: код выхода
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return error.code if isinstance(error.code, int) else 2

    _configure_logging(verbose=args.verbose)
    try:
        if args.mc_samples < 1:
            msg = f'--mc-samples must be positive, got {args.mc_samples}.'
            raise ParameterOutOfRangeError(msg)
        if args.threads < 1:
            msg = f'--threads must be positive, got {args.threads}.'
            raise ParameterOutOfRangeError(msg)
        return args.handler(args)
    except ValidationError as error:
        logger.error('%s: %s', type(error).__name__, error)
        return 2
    except NumericError as error:
        logger.error('%s: %s', type(error).__name__, error)
        return 3


if __name__ == '__main__':
    sys.exit(main())
