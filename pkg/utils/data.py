"""
Модуль для работы с размеченными выборками.

Предоставляет представление двухклассового набора данных, генерацию
выборок из гауссовых смесей, бесконечные потоки выборок для
последовательного тестирования, разбиение на обучение/отложенную часть,
сохранение в CSV и необязательную стандартизацию признаков.
"""
import json
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from config import STREAM_CHUNK
from utils.exceptions import ConfigError, DataFileError, DimensionMismatchError
from utils.logger import get_module_logger
from utils.seeding import make_rng

# Настраиваем логгер для модуля данных
data_logger = get_module_logger('data')

WEIGHT_SUM_TOLERANCE = 1e-12

@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Двухклассовый набор: class0 (M строк, гипотеза H0) и class1 (N строк, H1).

    Каждая строка содержит вектор признаков размерности dim. Массивы приводятся
    к float64 и защищаются от записи.
    """
    class0: np.ndarray
    class1: np.ndarray

    def __post_init__(self):
        class0 = np.array(self.class0, dtype=float, copy=True)
        class1 = np.array(self.class1, dtype=float, copy=True)
        if class0.ndim == 1:
            class0 = class0.reshape(-1, 1)
        if class1.ndim == 1:
            class1 = class1.reshape(-1, 1)
        if class0.ndim != 2 or class1.ndim != 2:
            raise DataFileError("Классы должны быть матрицами выборок")
        if len(class0) < 1 or len(class1) < 1:
            raise DataFileError(
                f"Пустой класс в наборе: M={len(class0)}, N={len(class1)}",
                "Каждый класс должен содержать хотя бы одну выборку"
            )
        if class0.shape[1] != class1.shape[1] or class0.shape[1] < 1:
            raise DimensionMismatchError(
                f"Размерности классов не совпадают: {class0.shape[1]} и {class1.shape[1]}"
            )
        if not (np.all(np.isfinite(class0)) and np.all(np.isfinite(class1))):
            raise DataFileError("Набор содержит нечисловые или бесконечные значения")
        class0.setflags(write=False)
        class1.setflags(write=False)
        object.__setattr__(self, "class0", class0)
        object.__setattr__(self, "class1", class1)

    @property
    def dim(self) -> int:
        return int(self.class0.shape[1])

    @property
    def m(self) -> int:
        """Число выборок класса 0."""
        return int(len(self.class0))

    @property
    def n(self) -> int:
        """Число выборок класса 1."""
        return int(len(self.class1))

    def pooled(self) -> np.ndarray:
        """Объединённые выборки: сначала класс 0, затем класс 1."""
        return np.vstack([self.class0, self.class1])

    def rows(self, class_label: int) -> np.ndarray:
        return self.class1 if class_label == 1 else self.class0

@dataclass(frozen=True, eq=False)
class MixtureComponent:
    """Компонента смеси: вес, среднее и ковариация."""
    weight: float
    mean: np.ndarray
    cov: np.ndarray

class GaussianMixtureSpec:
    """
    Гауссова смесь sum_k w_k N(mean_k, cov_k).

    При создании проверяются веса (сумма 1 с точностью 1e-12) и
    положительная определённость ковариаций: неудачное разложение
    Холецкого означает, что матрица не положительно определена.
    """

    def __init__(self, components: Sequence[Tuple[float, Sequence[float], Sequence[Sequence[float]]]]):
        if not components:
            raise ConfigError("Смесь должна содержать хотя бы одну компоненту")

        parsed: List[MixtureComponent] = []
        for weight, mean, cov in components:
            parsed.append(MixtureComponent(
                weight=float(weight),
                mean=np.asarray(mean, dtype=float).reshape(-1),
                cov=np.atleast_2d(np.asarray(cov, dtype=float)),
            ))

        dim = parsed[0].mean.size
        for k, comp in enumerate(parsed):
            if not 0.0 < comp.weight <= 1.0:
                raise ConfigError(f"Вес компоненты {k} вне (0, 1]: {comp.weight}")
            if comp.mean.size != dim or comp.cov.shape != (dim, dim):
                raise DimensionMismatchError(
                    f"Компонента {k}: размерность {comp.mean.size}, ковариация {comp.cov.shape}, ожидалось {dim}"
                )
            if not np.all(np.isfinite(comp.mean)) or not np.all(np.isfinite(comp.cov)):
                raise ConfigError(f"Компонента {k} содержит нечисловые значения")
            if not np.allclose(comp.cov, comp.cov.T, rtol=0.0, atol=1e-12):
                raise ConfigError(f"Ковариация компоненты {k} несимметрична")

        total = sum(comp.weight for comp in parsed)
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ConfigError(f"Сумма весов смеси {total!r} отличается от 1")

        chols = []
        for k, comp in enumerate(parsed):
            try:
                chols.append(np.linalg.cholesky(comp.cov))
            except np.linalg.LinAlgError:
                raise ConfigError(
                    f"Ковариация компоненты {k} не положительно определена",
                    "Ковариационные матрицы смеси должны быть положительно определены"
                )

        self.components: Tuple[MixtureComponent, ...] = tuple(parsed)
        self.dim = int(dim)
        self._weights = np.array([comp.weight for comp in parsed])
        self._cum_weights = np.cumsum(self._weights)
        self._means = np.stack([comp.mean for comp in parsed])
        self._chols = np.stack(chols)
        self._densities = [multivariate_normal(mean=comp.mean, cov=comp.cov) for comp in parsed]

    @property
    def weights(self) -> np.ndarray:
        return self._weights.copy()

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """
        Генерирует size выборок: номер компоненты по весам, затем
        гауссов вектор mean + L z.
        """
        u = rng.random(size)
        labels = np.searchsorted(self._cum_weights, u, side="right")
        labels = np.minimum(labels, len(self.components) - 1)
        z = rng.standard_normal((size, self.dim))
        out = np.empty((size, self.dim))
        for k in range(len(self.components)):
            idx = labels == k
            if np.any(idx):
                out[idx] = self._means[k] + z[idx] @ self._chols[k].T
        return out

    def log_density(self, X: np.ndarray) -> np.ndarray:
        """
        Логарифм плотности смеси в точках X (n x d) через log-sum-exp.

        Args:
            X: Матрица точек или один вектор

        Returns:
            Массив длины n
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(f"Точка размерности {X.shape[1]}, смесь размерности {self.dim}")
        terms = np.stack([
            np.log(comp.weight) + np.reshape(dens.logpdf(X), (-1,))
            for comp, dens in zip(self.components, self._densities)
        ])
        return logsumexp(terms, axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "components": [
                {"weight": comp.weight, "mean": comp.mean.tolist(), "cov": comp.cov.tolist()}
                for comp in self.components
            ]
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "GaussianMixtureSpec":
        try:
            return cls([(c["weight"], c["mean"], c["cov"]) for c in payload["components"]])
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Неверное описание смеси: {e}")

def load_mixture_specs(path: str) -> Tuple[GaussianMixtureSpec, GaussianMixtureSpec]:
    """
    Читает JSON со спецификацией обоих классов: {"class0": {...}, "class1": {...}}.

    Raises:
        ConfigError: файл отсутствует или описание неверно
    """
    if not os.path.exists(path):
        raise ConfigError(f"Файл спецификации не найден: {path}",
                          f"Файл спецификации не найден: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Файл спецификации {path} повреждён: {e}")
    if "class0" not in payload or "class1" not in payload:
        raise ConfigError(f"В файле {path} должны быть разделы class0 и class1")

    spec0 = GaussianMixtureSpec.from_dict(payload["class0"])
    spec1 = GaussianMixtureSpec.from_dict(payload["class1"])
    if spec0.dim != spec1.dim:
        raise DimensionMismatchError(f"Размерности классов в {path} не совпадают")
    data_logger.info(f"Загружена спецификация смесей из {path} (d={spec0.dim})")
    return spec0, spec1

class SampleStream:
    """
    Бесконечный ленивый поток выборок.

    Выборки генерируются блоками фиксированного размера, поэтому первые n
    элементов не зависят от того, как читался поток. peek(k) показывает
    следующие k выборок без потребления, advance(k) потребляет их,
    consumed хранит число потреблённых элементов.
    """

    def __init__(self, draw_chunk: Callable[[np.random.Generator, int], np.ndarray],
                 rng: np.random.Generator, dim: int, chunk: int = STREAM_CHUNK):
        self._draw_chunk = draw_chunk
        self._rng = rng
        self.dim = int(dim)
        self._chunk = int(chunk)
        self._buffer = np.empty((0, self.dim))
        self._pos = 0
        self.consumed = 0

    def _fill(self, k: int) -> None:
        available = len(self._buffer) - self._pos
        if available >= k:
            return
        blocks = [self._buffer[self._pos:]]
        while available < k:
            block = self._draw_chunk(self._rng, self._chunk)
            blocks.append(block)
            available += len(block)
        self._buffer = np.vstack(blocks)
        self._pos = 0

    def peek(self, k: int) -> np.ndarray:
        """Следующие k выборок без потребления."""
        self._fill(k)
        return self._buffer[self._pos:self._pos + k]

    def advance(self, k: int) -> None:
        """Потребляет k выборок."""
        self._fill(k)
        self._pos += k
        self.consumed += k

    def take(self, k: int) -> np.ndarray:
        """Потребляет и возвращает следующие k выборок (копия)."""
        block = self.peek(k).copy()
        self.advance(k)
        return block

    def __iter__(self) -> Iterator[np.ndarray]:
        return self

    def __next__(self) -> np.ndarray:
        return self.take(1)[0]

class MixtureSource:
    """Фабрика потоков из гауссовой смеси."""

    def __init__(self, spec: GaussianMixtureSpec, label: str = "spec"):
        self.spec = spec
        self.dim = spec.dim
        self.description = f"mixture:{label}"

    def open(self, rng: np.random.Generator) -> SampleStream:
        return SampleStream(self.spec.draw, rng, self.dim)

class ResampleSource:
    """
    Фабрика потоков, выбирающих строки набора равновероятно с возвращением.

    Используется для реальных данных (UCI HAR), где строки не образуют
    последовательность.
    """

    def __init__(self, rows: np.ndarray, label: str = "rows"):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or len(rows) < 1:
            raise DataFileError("Для потока с возвращением нужна непустая матрица строк")
        self.rows = rows
        self.dim = int(rows.shape[1])
        self.description = f"resample:{label}"

    def _draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.rows[rng.integers(0, len(self.rows), size=size)]

    def open(self, rng: np.random.Generator) -> SampleStream:
        return SampleStream(self._draw, rng, self.dim)

def sample_stream(spec: GaussianMixtureSpec, seed: int) -> SampleStream:
    """
    Бесконечный поток i.i.d. выборок из смеси, воспроизводимый по seed.

    Args:
        spec: Спецификация смеси
        seed: Seed генератора

    Returns:
        SampleStream
    """
    return MixtureSource(spec).open(make_rng(seed))

def resample_stream(rows: np.ndarray, seed: int) -> SampleStream:
    """Бесконечный поток строк rows с возвращением, воспроизводимый по seed."""
    return ResampleSource(rows).open(make_rng(seed))

def gen_mixture_samples(spec: GaussianMixtureSpec, n: int, seed: int) -> np.ndarray:
    """
    n i.i.d. выборок из смеси. Совпадает с первыми n элементами
    sample_stream(spec, seed).

    Args:
        spec: Спецификация смеси
        n: Число выборок (>= 1)
        seed: Seed генератора

    Returns:
        Матрица n x d
    """
    if n < 1:
        raise ConfigError(f"Число выборок должно быть >= 1, получено {n}")
    return sample_stream(spec, seed).take(n)

def split(dataset: LabeledDataset, holdout_fraction: float,
          seed: int) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Поклассовое случайное разбиение на обучающую и отложенную части.

    Args:
        dataset: Исходный набор (в каждом классе >= 2 выборок)
        holdout_fraction: Доля отложенной части в (0, 1)
        seed: Seed перестановок

    Returns:
        (train, holdout)

    Raises:
        ConfigError: доля вне (0, 1) или одна из частей оказывается пустой
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError(f"holdout_fraction должна быть в (0, 1), получено {holdout_fraction}")

    rng = make_rng(seed)
    train_parts, hold_parts = [], []
    for label in (0, 1):
        rows = dataset.rows(label)
        if len(rows) < 2:
            raise ConfigError(f"В классе {label} меньше двух выборок, разбиение невозможно")
        n_hold = int(round(holdout_fraction * len(rows)))
        if n_hold < 1 or n_hold > len(rows) - 1:
            raise ConfigError(
                f"Доля {holdout_fraction} даёт пустую часть для класса {label} ({len(rows)} выборок)"
            )
        perm = rng.permutation(len(rows))
        hold_parts.append(rows[perm[:n_hold]])
        train_parts.append(rows[perm[n_hold:]])

    train = LabeledDataset(train_parts[0], train_parts[1])
    holdout = LabeledDataset(hold_parts[0], hold_parts[1])
    data_logger.debug(f"Разбиение: обучение {train.m}+{train.n}, отложено {holdout.m}+{holdout.n}")
    return train, holdout

@dataclass
class Standardizer:
    """
    Поэлементное аффинное преобразование (x - mean) / scale.

    Параметры оцениваются только на обучающих данных.
    """
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, dataset: LabeledDataset) -> "Standardizer":
        pooled = dataset.pooled()
        mean = pooled.mean(axis=0)
        scale = pooled.std(axis=0)
        scale[scale == 0.0] = 1.0
        return cls(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def apply(self, dataset: LabeledDataset) -> LabeledDataset:
        return LabeledDataset(self.transform(dataset.class0), self.transform(dataset.class1))

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

def save_dataset_csv(dataset: LabeledDataset, path: str) -> None:
    """
    Сохраняет набор в CSV с заголовком class,f1,...,fd.

    Args:
        dataset: Набор данных
        path: Путь к файлу
    """
    columns = [f"f{i + 1}" for i in range(dataset.dim)]
    frame = pd.DataFrame(np.vstack([dataset.class0, dataset.class1]), columns=columns)
    frame.insert(0, "class", [0] * dataset.m + [1] * dataset.n)

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    data_logger.info(f"Набор сохранён в {path}: M={dataset.m}, N={dataset.n}, d={dataset.dim}")

def load_dataset_csv(path: str) -> LabeledDataset:
    """
    Загружает набор из CSV формата class,f1,...,fd.

    Raises:
        DataFileError: файл отсутствует, заголовок неверен или метки вне {0, 1}
    """
    if not os.path.exists(path):
        raise DataFileError(f"Файл набора не найден: {path}", f"Файл набора не найден: {path}")

    frame = pd.read_csv(path)
    expected = ["class"] + [f"f{i + 1}" for i in range(frame.shape[1] - 1)]
    if list(frame.columns) != expected or frame.shape[1] < 2:
        raise DataFileError(f"Неверный заголовок CSV {path}: {list(frame.columns)}")

    labels = frame["class"].to_numpy()
    if not np.isin(labels, [0, 1]).all():
        bad = int(np.flatnonzero(~np.isin(labels, [0, 1]))[0]) + 2
        raise DataFileError(f"Метка класса вне {{0, 1}} в строке {bad} файла {path}")

    try:
        values = frame.drop(columns=["class"]).to_numpy(dtype=float)
    except ValueError as e:
        raise DataFileError(f"Нечисловое значение в {path}: {e}")

    return LabeledDataset(values[labels == 0], values[labels == 1])
