import csv
import json
import math
from typing import Any, Iterable, Mapping, Sequence, TextIO

from porcupine import __version__
from porcupine.types import ExperimentSpec


def format_value(value: Any) -> str:
    """
    Значение ячейки CSV: числа с плавающей точкой в 17 значащих цифрах, остальное через str.
    :param value: значение
    :return: строка
    """
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return format(value, '.17g')
    if value is None:
        return ''
    return str(value)


def make_spec(command: str, params: Mapping[str, Any], output: str = '-') -> ExperimentSpec:
    return ExperimentSpec(command=command, params=dict(params), output=output)


def write_header(spec: ExperimentSpec, seed: int, stream: TextIO) -> None:
    """Комментарий в начале CSV: версия, главный seed и описание запуска."""
    stream.write(f'# porcupine {__version__}\n')
    stream.write(f'# seed={seed}\n')
    stream.write(f'# spec={json.dumps(spec, sort_keys=True, default=str)}\n')


def write_rows(
    spec: ExperimentSpec,
    seed: int,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    stream: TextIO,
) -> None:
    """
    Записывает CSV с заголовком-комментарием и строкой имен столбцов.
    :param spec: описание запуска
    :param seed: главный seed
    :param columns: имена столбцов в порядке вывода
    :param rows: строки; отсутствующие ключи дают пустые ячейки
    :param stream: текстовый поток
    """
    write_header(spec, seed, stream)
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(column)) for column in columns])
