"""
Гауссово ядро, выбор центров и модель логарифма отношения плотностей в RKHS.

Ядро K(x, y) = exp(-||x - y||^2 / sigma^2): в знаменателе sigma^2,
а не 2 sigma^2.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from utils.data import LabeledDataset
from utils.exceptions import ConfigError, DataFileError, DimensionMismatchError
from utils.logger import get_module_logger
from utils.seeding import make_rng

# Настраиваем логгер для модуля ядра
kernel_logger = get_module_logger('kernel')

# Центры выбираются равновероятно из объединения классов, без балансировки
CENTER_SAMPLING = "pooled-uniform"

def _check_sigma(sigma: float) -> None:
    if not (np.isfinite(sigma) and sigma > 0):
        raise ConfigError(f"Ширина ядра sigma должна быть положительной, получено {sigma}")

def gauss_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """
    Значение гауссова ядра exp(-||x - y||^2 / sigma^2).

    Raises:
        DimensionMismatchError: размерности x и y различны
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"Размерности аргументов ядра различны: {x.shape} и {y.shape}")
    _check_sigma(sigma)
    return float(np.exp(-np.sum((x - y) ** 2) / sigma ** 2))

def feature_matrix(X: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """
    Матрица признаков Phi[i, c] = K(X[i], centers[c]).

    Args:
        X: Точки n x d
        centers: Центры C x d
        sigma: Ширина ядра

    Returns:
        Матрица n x C
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if X.shape[1] != centers.shape[1]:
        raise DimensionMismatchError(
            f"Размерность точек {X.shape[1]} не совпадает с размерностью центров {centers.shape[1]}"
        )
    _check_sigma(sigma)
    diff = X[:, None, :] - centers[None, :, :]
    return np.exp(-np.sum(diff ** 2, axis=-1) / sigma ** 2)

def feature_vec(x: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """Вектор признаков одной точки: K(x, center_c) для всех центров."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatchError(f"Ожидался вектор, получен массив формы {x.shape}")
    return feature_matrix(x[None, :], centers, sigma)[0]

def kernel_matrix(centers: np.ndarray, sigma: float) -> np.ndarray:
    """
    Матрица ядра K(i, j) = exp(-||x_ci - x_cj||^2 / sigma^2).

    Симметрична, на диагонали единицы, элементы в (0, 1].
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if len(centers) < 1:
        raise ConfigError("Для матрицы ядра нужен хотя бы один центр")
    K = feature_matrix(centers, centers, sigma)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K

def pick_centers(dataset: LabeledDataset, C: int, seed: int) -> np.ndarray:
    """
    Выбирает C центров равновероятно без возвращения из объединённых классов.

    Различие центров определяется по индексу строки, а не по значению.

    Raises:
        ConfigError: C < 1 или C больше M + N
    """
    pool = dataset.pooled()
    if C < 1 or C > len(pool):
        raise ConfigError(
            f"Число центров {C} вне диапазона 1..{len(pool)}",
            f"Число центров должно быть от 1 до {len(pool)}"
        )
    index = make_rng(seed).choice(len(pool), size=C, replace=False)
    kernel_logger.debug(f"Выбрано {C} центров из {len(pool)} выборок")
    return pool[index].copy()

@dataclass(frozen=True, eq=False)
class KernelModel:
    """
    Модель g(x) = sum_c alpha_c K(x, center_c) как оценка log(p1(x)/p0(x)).

    Attributes:
        centers: Центры C x d
        sigma: Ширина ядра
        alpha: Коэффициенты длины C
        meta: Описание метода и гиперпараметров
    """
    centers: np.ndarray
    sigma: float
    alpha: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        centers = np.atleast_2d(np.array(self.centers, dtype=float))
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        _check_sigma(self.sigma)
        if len(centers) < 1:
            raise ConfigError("Модель должна содержать хотя бы один центр")
        if alpha.size != len(centers):
            raise DimensionMismatchError(f"Длина alpha {alpha.size} не равна числу центров {len(centers)}")
        if not np.all(np.isfinite(alpha)):
            raise ConfigError("Коэффициенты alpha должны быть конечными")
        centers.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return int(self.centers.shape[1])

    @property
    def num_centers(self) -> int:
        return int(len(self.centers))

    def log_ratio_batch(self, X: np.ndarray) -> np.ndarray:
        return feature_matrix(X, self.centers, self.sigma) @ self.alpha

def log_ratio(model: KernelModel, x: np.ndarray) -> float:
    """
    Значение g(x) = dot(alpha, feature_vec(x)).

    Raises:
        DimensionMismatchError: размерность x не совпадает с моделью
    """
    return float(np.dot(model.alpha, feature_vec(x, model.centers, model.sigma)))

def save_model(model: KernelModel, path: str) -> None:
    """Сохраняет модель в JSON {kind, sigma, centers, alpha, meta}."""
    payload = {
        "kind": "kernel",
        "sigma": model.sigma,
        "centers": model.centers.tolist(),
        "alpha": model.alpha.tolist(),
        "meta": model.meta,
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, indent=2)
    kernel_logger.info(f"Модель сохранена в {path} (C={model.num_centers}, sigma={model.sigma})")

def model_from_dict(payload: Dict[str, Any]) -> KernelModel:
    try:
        return KernelModel(
            centers=np.asarray(payload["centers"], dtype=float),
            sigma=float(payload["sigma"]),
            alpha=np.asarray(payload["alpha"], dtype=float),
            meta=dict(payload.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataFileError(f"Неверное описание модели ядра: {e}")

def load_model(path: str) -> KernelModel:
    """Загружает модель ядра из JSON."""
    if not os.path.exists(path):
        raise DataFileError(f"Файл модели не найден: {path}", f"Файл модели не найден: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("kind", "kernel") != "kernel":
        raise DataFileError(f"Файл {path} не является моделью ядра")
    return model_from_dict(payload)

def save_centers(centers: np.ndarray, path: str) -> None:
    """Сохраняет центры для общей геометрии нескольких методов."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"kind": "centers", "sampling": CENTER_SAMPLING, "centers": np.asarray(centers).tolist()}, f, indent=2)

def load_centers(path: str) -> np.ndarray:
    """
    Загружает центры из файла центров или из любой модели ядра.

    Raises:
        DataFileError: файл отсутствует или не содержит центров
    """
    if not os.path.exists(path):
        raise DataFileError(f"Файл центров не найден: {path}", f"Файл центров не найден: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if "centers" not in payload:
        raise DataFileError(f"В файле {path} нет центров")
    return np.atleast_2d(np.asarray(payload["centers"], dtype=float))
