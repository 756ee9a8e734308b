import csv
from pathlib import Path
from typing import Dict, List, Optional

import pytest

from porcupine.cli import main
from porcupine.lines import random_line_set, read_line_set, write_line_set


def _read_rows(text: str) -> List[Dict[str, str]]:
    body = [line for line in text.splitlines() if line and not line.startswith('#')]
    return list(csv.DictReader(body))


def test_risk_scalar_demo(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Скалярные примеры риска
    Act: Запуск `porcupine risk --matched --demo scalar`
    Assert: Код выхода 0, заголовок с seed, нулевой риск в точке w = w*
    """
    code = main(['risk', '--matched', '--demo', 'scalar'])
    output = capsys.readouterr().out
    rows = {row['instance']: row for row in _read_rows(output)}

    assert code == 0  # nosec
    assert output.startswith('# porcupine ')  # nosec
    assert '# seed=' in output  # nosec
    assert float(rows['w*=6,4;w=6,4']['total']) == 0.0  # nosec
    assert float(rows['w*=6,-4;w=6,4']['total']) > 0.0  # nosec


def test_risk_random_demo_with_monte_carlo(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Случайная несогласованная пара сетей
    Act: Запуск `porcupine risk --mismatched --demo random --mc`
    Assert: Столбцы оценки Монте-Карло присутствуют, стандартная ошибка положительна
    """
    code = main(['--mc-samples', '20000', 'risk', '--mismatched', '--demo', 'random', '--mc'])
    rows = _read_rows(capsys.readouterr().out)

    assert code == 0 and len(rows) == 1  # nosec
    assert float(rows[0]['mc_stderr']) > 0.0  # nosec
    assert float(rows[0]['total']) >= 0.0  # nosec


def _write_lines(path: Path, d: int, r: int, seed: int) -> str:
    with open(path, 'w', encoding='utf-8') as stream:
        write_line_set(random_line_set(d, r, seed), stream)
    return str(path)


@pytest.mark.parametrize(
    'flag, code, mode',
    [
        ('--matched', 2, None),
        ('--mismatched', 0, '"mode": "mismatched"'),
        (None, 0, '"mode": "auto"'),
    ],
)
def test_risk_mode_flag_on_different_line_files(
    tmp_path: Path,
    capsys: pytest.CaptureFixture,
    flag: Optional[str],
    code: int,
    mode: Optional[str],
) -> None:
    """
    Arrange: Два файла с разными наборами прямых для обучаемой сети и сети данных
    Act: Запуск `porcupine risk` с флагом режима и без него
    Assert: Согласованный режим отвергает пару с кодом 2, остальные режимы считают риск
    """
    lines = _write_lines(tmp_path / 'lines.csv', 4, 3, 5)
    lines_star = _write_lines(tmp_path / 'lines_star.csv', 4, 2, 6)
    argv = ['risk', '--lines', lines, '--lines-star', lines_star]
    if flag:
        argv.insert(1, flag)

    result = main(argv)
    output = capsys.readouterr().out

    assert result == code  # nosec
    if mode:
        assert mode in output  # nosec
        assert float(_read_rows(output)[0]['total']) > 0.0  # nosec


def test_risk_matched_flag_on_shared_lines(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Случайная пара сетей на общем наборе прямых
    Act: Запуск `porcupine risk --matched --demo random`
    Assert: Код выхода 0, в заголовке записан согласованный режим
    """
    code = main(['risk', '--matched', '--demo', 'random'])
    output = capsys.readouterr().out

    assert code == 0  # nosec
    assert '"mode": "matched"' in output  # nosec
    assert float(_read_rows(output)[0]['total']) >= 0.0  # nosec


@pytest.mark.parametrize(
    ('argv', 'code'),
    [
        (['--mc-samples', '0', 'risk'], 2),
        (['schur-sweep', '--d', '3', '--r-star', '2', '--r', 'abc'], 2),
        (['landscape', 'classify', '--signs', '+x'], 2),
        (['schur-sweep', '--d', '1', '--r-star', '2', '--r', '2', '--trials', '1'], 3),
    ],
)
def test_exit_codes(argv: List[str], code: int) -> None:
    """
    Arrange: Недопустимые аргументы и численно невыполнимая задача
    Act: Вызов функции `main`
    Assert: Код 2 для ошибок проверки, код 3 для численных ошибок
    """
    assert main(argv) == code  # nosec


def test_schur_sweep_is_reproducible(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Одинаковые аргументы и seed
    Act: Два запуска `porcupine schur-sweep`
    Assert: Байтово одинаковый вывод
    """
    argv = ['--seed', '3', 'schur-sweep', '--d', '4', '--r-star', '2', '--r', '3,6', '--trials', '2', '--nearest']

    main(argv)
    first = capsys.readouterr().out
    main(argv)
    second = capsys.readouterr().out

    assert first == second  # nosec
    assert len(_read_rows(first)) == 4  # nosec


def test_landscape_scalar_classify(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Скалярная PNN с w* = (6, -4)
    Act: Запуск `porcupine landscape classify --scalar`
    Assert: Область ++ содержит только плохие локальные минимумы, область +- только глобальный
    """
    code = main(['landscape', 'classify', '--scalar', '--w-star=6,-4'])
    labels = {row['region']: row['label'] for row in _read_rows(capsys.readouterr().out)}

    assert code == 0  # nosec
    assert labels['++'] == 'OnlyBadLocal' and labels['--'] == 'OnlyBadLocal'  # nosec
    assert labels['+-'] == 'OnlyGlobal'  # nosec


def test_landscape_signature_classify(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Три прямые в R^3, одна из которых однородна
    Act: Запуск `porcupine landscape classify --signs`
    Assert: Метка MayHaveBadLocal и свидетель - однородная прямая
    """
    main(['landscape', 'classify', '--d', '3', '--signs', '+-,++,-+'])
    row = _read_rows(capsys.readouterr().out)[0]

    assert row['label'] == 'MayHaveBadLocal' and row['witness'] == '1'  # nosec
    assert row['mixed_lines'] == '2'  # nosec


def test_asymptotic_limit(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: d = r = r* = 128
    Act: Запуск `porcupine asymptotic`
    Assert: Предел 2(1 - 2/pi)
    """
    code = main(['asymptotic', '--d', '128', '--r', '128', '--r-star', '128'])
    rows = _read_rows(capsys.readouterr().out)

    assert code == 0  # nosec
    assert rows[0]['quantity'] == 'limit'  # nosec
    assert float(rows[0]['value']) == pytest.approx(0.7267604552648372)  # nosec


def test_minimax_bound(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Параметры сети и оценок
    Act: Запуск `porcupine minimax bound` с заданным риском
    Assert: Все величины присутствуют и положительны
    """
    main(['minimax', 'bound', '--d', '4', '--s', '2', '--k', '3', '--risk', '0.5'])
    values = {row['quantity']: float(row['value']) for row in _read_rows(capsys.readouterr().out)}

    assert set(values) == {  # nosec
        'net_size_bound',
        'sparse_net_size',
        'sparse_net_size_known',
        'minimax_risk_bound',
        'sparse_lines_bound',
        'sparse_lines_bound_known',
    }
    assert all(value > 0 for value in values.values())  # nosec


def test_minimax_net_file(tmp_path: Path) -> None:
    """
    Arrange: Путь к выходному файлу
    Act: Запуск `porcupine minimax net --d 2 --delta 0.5 --out`
    Assert: Файл читается как набор прямых, размер совпадает с комментарием
    """
    path = tmp_path / 'net.csv'

    code = main(['minimax', 'net', '--d', '2', '--delta', '0.5', '--out', str(path)])
    text = path.read_text(encoding='utf-8')
    with path.open(encoding='utf-8') as stream:
        line_set = read_line_set(stream)

    assert code == 0  # nosec
    assert f'# size={line_set.size} ' in text  # nosec
    assert line_set.dim == 2  # nosec


def test_train_matched_summary(capsys: pytest.CaptureFixture) -> None:
    """
    Arrange: Небольшой согласованный протокол
    Act: Запуск `porcupine train matched --summary`
    Assert: По строке на каждое k, доли глобальных оптимумов в [0, 1]
    """
    argv = ['train', 'matched', '--d', '2', '--k', '2,4', '--trials', '2']
    argv += ['--epochs', '3', '--samples', '200', '--batch-size', '50', '--summary']

    code = main(argv)
    rows = _read_rows(capsys.readouterr().out)

    assert code == 0  # nosec
    assert [row['k'] for row in rows] == ['2', '4']  # nosec
    assert all(0.0 <= float(row['fraction_global']) <= 1.0 for row in rows)  # nosec
