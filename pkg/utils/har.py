"""
Загрузка набора UCI Human Activity Recognition (смартфон).

Файл признаков содержит 561 вещественный столбец, разделённый
пробелами (формат X_train.txt); в файле меток одно целое 1..6 в строке
(формат y_train.txt). Номера признаков задаются С ЕДИНИЦЫ, как в описании
набора: "признаки 1-3" означают столбцы 1, 2, 3.
"""
import os
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Tuple

import numpy as np
import pandas as pd

from utils.data import LabeledDataset
from utils.exceptions import ConfigError, DataFileError
from utils.logger import get_module_logger

# Настраиваем логгер для модуля загрузки HAR
har_logger = get_module_logger('har')

HAR_NUM_FEATURES = 561

ACTIVITY_NAMES = {
    1: "WALKING",
    2: "WALKING_UPSTAIRS",
    3: "WALKING_DOWNSTAIRS",
    4: "SITTING",
    5: "STANDING",
    6: "LAYING",
}

# Наборы признаков: среднее ускорение и средняя частота спектра ускорения
FEATURE_SETS = {
    "mean-acc": (1, 2, 3),
    "mean-freq-acc": (294, 295, 296),
}

# Бинарные задачи: (метки класса 1, метки класса 0)
TASKS = {
    "moving": ((1, 2, 3), (4, 5, 6)),
    "updown": ((2,), (3,)),
}

@dataclass(frozen=True)
class HarTask:
    """
    Бинарная задача на наборе HAR.

    Attributes:
        feature_indices: Номера столбцов (с 1) в порядке использования
        positive_labels: Коды активностей класса 1
        negative_labels: Коды активностей класса 0
    """
    feature_indices: Tuple[int, ...]
    positive_labels: FrozenSet[int]
    negative_labels: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "feature_indices", tuple(int(i) for i in self.feature_indices))
        object.__setattr__(self, "positive_labels", frozenset(int(i) for i in self.positive_labels))
        object.__setattr__(self, "negative_labels", frozenset(int(i) for i in self.negative_labels))
        if not self.feature_indices or not self.positive_labels or not self.negative_labels:
            raise ConfigError("Наборы признаков и меток задачи HAR не должны быть пустыми")
        if self.positive_labels & self.negative_labels:
            raise ConfigError(
                f"Метки классов пересекаются: {sorted(self.positive_labels & self.negative_labels)}"
            )

def make_task(task: str = "moving", feature_set: str = "mean-acc",
              positive: Iterable[int] = (), negative: Iterable[int] = (),
              feature_indices: Iterable[int] = ()) -> HarTask:
    """
    Строит HarTask из именованных пресетов или явных списков.

    Args:
        task: moving | updown | custom
        feature_set: mean-acc | mean-freq-acc | custom
        positive, negative: Метки для task=custom
        feature_indices: Столбцы для feature_set=custom
    """
    if task == "custom":
        labels = (tuple(positive), tuple(negative))
    elif task in TASKS:
        labels = TASKS[task]
    else:
        raise ConfigError(f"Неизвестная задача HAR: {task}", f"Задача HAR должна быть одной из: {', '.join(TASKS)}, custom")

    if feature_set == "custom":
        indices = tuple(feature_indices)
    elif feature_set in FEATURE_SETS:
        indices = FEATURE_SETS[feature_set]
    else:
        raise ConfigError(f"Неизвестный набор признаков: {feature_set}")

    return HarTask(feature_indices=indices, positive_labels=frozenset(labels[0]),
                   negative_labels=frozenset(labels[1]))

@dataclass
class IngestionReport:
    """Отчёт о загрузке: сколько строк каждой активности и сколько отброшено."""
    features_path: str
    labels_path: str
    rows_total: int
    rows_class0: int
    rows_class1: int
    rows_dropped: int
    label_counts: Dict[int, int] = field(default_factory=dict)
    feature_indices: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "features_path": self.features_path,
            "labels_path": self.labels_path,
            "rows_total": self.rows_total,
            "rows_class0": self.rows_class0,
            "rows_class1": self.rows_class1,
            "rows_dropped": self.rows_dropped,
            "label_counts": {str(k): v for k, v in sorted(self.label_counts.items())},
            "feature_indices": list(self.feature_indices),
        }

def _read_labels(labels_path: str) -> np.ndarray:
    labels: List[int] = []
    with open(labels_path, "r", encoding="utf-8") as f:
        for row, line in enumerate(f, start=1):
            token = line.strip()
            if not token:
                continue
            try:
                value = int(token)
            except ValueError:
                raise DataFileError(
                    f"Нечисловая метка '{token}' в строке {row} файла {labels_path}",
                    f"Файл меток {labels_path}: строка {row} содержит нечисловое значение"
                )
            if value not in ACTIVITY_NAMES:
                raise DataFileError(f"Метка {value} вне 1..6 в строке {row} файла {labels_path}")
            labels.append(value)
    return np.array(labels, dtype=int)

def _locate_bad_token(features_path: str) -> Tuple[int, int, str]:
    """Находит первую строку/столбец с нечисловым токеном (нумерация с 1)."""
    with open(features_path, "r", encoding="utf-8") as f:
        for row, line in enumerate(f, start=1):
            for col, token in enumerate(line.split(), start=1):
                try:
                    float(token)
                except ValueError:
                    return row, col, token
    return 0, 0, ""

def _read_features(features_path: str) -> np.ndarray:
    try:
        frame = pd.read_csv(features_path, sep=r"\s+", header=None, dtype=float)
    except ValueError as e:
        if isinstance(e, pd.errors.ParserError):
            raise DataFileError(f"Неверное число столбцов в {features_path}: {e}")
        row, col, token = _locate_bad_token(features_path)
        raise DataFileError(
            f"Нечисловой токен '{token}' в строке {row}, столбце {col} файла {features_path}",
            f"Файл признаков: строка {row}, столбец {col} содержит '{token}'"
        )

    values = frame.to_numpy()
    if values.shape[1] != HAR_NUM_FEATURES:
        raise DataFileError(
            f"В {features_path} {values.shape[1]} столбцов, ожидалось {HAR_NUM_FEATURES}"
        )
    missing = np.flatnonzero(np.isnan(values).any(axis=1))
    if missing.size:
        raise DataFileError(
            f"Строка {int(missing[0]) + 1} файла {features_path} содержит меньше {HAR_NUM_FEATURES} значений"
        )
    return values

def load_har(features_path: str, labels_path: str,
             task: HarTask) -> Tuple[LabeledDataset, IngestionReport]:
    """
    Загружает бинарную задачу из файлов UCI HAR.

    Строки с метками из negative_labels попадают в класс 0, из
    positive_labels в класс 1, остальные отбрасываются и учитываются
    в отчёте. Сохраняются только столбцы task.feature_indices в заданном
    порядке.

    Args:
        features_path: Путь к X_*.txt
        labels_path: Путь к y_*.txt
        task: Описание задачи

    Returns:
        (LabeledDataset, IngestionReport)

    Raises:
        DataFileError: несовпадение числа строк, нечисловой токен,
                       индекс признака вне 1..561, пустой класс
    """
    for path in (features_path, labels_path):
        if not os.path.exists(path):
            raise DataFileError(f"Файл не найден: {path}", f"Файл не найден: {path}")

    for position, index in enumerate(task.feature_indices, start=1):
        if not 1 <= index <= HAR_NUM_FEATURES:
            raise DataFileError(
                f"Номер признака {index} (позиция {position}) вне диапазона 1..{HAR_NUM_FEATURES}",
                f"Номер признака {index} вне 1..{HAR_NUM_FEATURES}"
            )

    har_logger.info(f"Чтение признаков из {features_path}")
    values = _read_features(features_path)
    labels = _read_labels(labels_path)

    if len(labels) != len(values):
        raise DataFileError(
            f"Число строк не совпадает: {len(values)} в {features_path}, {len(labels)} в {labels_path}",
            "Файлы признаков и меток содержат разное число строк"
        )

    columns = [i - 1 for i in task.feature_indices]
    mask0 = np.isin(labels, sorted(task.negative_labels))
    mask1 = np.isin(labels, sorted(task.positive_labels))
    if not mask0.any() or not mask1.any():
        raise DataFileError(
            f"В файле {labels_path} нет строк для одного из классов "
            f"(класс 0: {int(mask0.sum())}, класс 1: {int(mask1.sum())})",
            "Метки задачи не встречаются в файле меток"
        )

    dataset = LabeledDataset(values[mask0][:, columns], values[mask1][:, columns])
    unique, counts = np.unique(labels, return_counts=True)
    report = IngestionReport(
        features_path=features_path,
        labels_path=labels_path,
        rows_total=int(len(labels)),
        rows_class0=dataset.m,
        rows_class1=dataset.n,
        rows_dropped=int(len(labels) - dataset.m - dataset.n),
        label_counts={int(u): int(c) for u, c in zip(unique, counts)},
        feature_indices=list(task.feature_indices),
    )

    har_logger.info(
        f"Загружено {report.rows_total} строк: класс 0 = {report.rows_class0}, "
        f"класс 1 = {report.rows_class1}, отброшено {report.rows_dropped}"
    )
    return dataset, report
