"""
Базовый метод WaldBoost: дискретный AdaBoost на решающих пнях.

Логарифм отношения плотностей восстанавливается из итогового
классификатора как log r(x) = 2 F_A(x) + log(pi0 / pi1), где
F_A(x) = sum_i c_i f_i(x). Каскадные пороги исходного WaldBoost не
используются: обученный ансамбль накапливается и сравнивается с
порогами SPRT.
"""
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from utils.data import LabeledDataset
from utils.exceptions import ConfigError, DataFileError, DimensionMismatchError, InfeasibleError
from utils.logger import get_module_logger

# Настраиваем логгер для модуля WaldBoost
boost_logger = get_module_logger('waldboost')

EPS_CLAMP = 1e-10

@dataclass(frozen=True)
class Stump:
    """
    Решающий пень: +1, если polarity * (x[feature_index] - threshold) > 0, иначе -1.
    """
    feature_index: int
    threshold: float
    polarity: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            margin = self.polarity * (X[:, self.feature_index] - self.threshold)
        return np.where(margin > 0, 1.0, -1.0)

    def predict_one(self, x: np.ndarray) -> float:
        return 1.0 if self.polarity * (float(x[self.feature_index]) - self.threshold) > 0 else -1.0

@dataclass(frozen=True, eq=False)
class Ensemble:
    """
    Обученный ансамбль: пни, их веса c_i > 0 и log(pi0 / pi1).

    Attributes:
        stumps: Пни в порядке обучения
        weights: Веса c_i
        prior_log_odds: log(pi0 / pi1)
        dim: Размерность признаков
        loss_history: Экспоненциальная потеря обучения после каждого раунда
    """
    stumps: Tuple[Stump, ...]
    weights: Tuple[float, ...]
    prior_log_odds: float
    dim: int
    loss_history: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stumps", tuple(self.stumps))
        object.__setattr__(self, "weights", tuple(float(c) for c in self.weights))
        object.__setattr__(self, "loss_history", tuple(float(v) for v in self.loss_history))
        if len(self.stumps) != len(self.weights) or not self.stumps:
            raise ConfigError("Число пней и весов должно совпадать и быть положительным")
        if not all(np.isfinite(c) and c > 0 for c in self.weights):
            raise ConfigError("Веса пней должны быть конечными и положительными")
        for stump in self.stumps:
            if not 0 <= stump.feature_index < self.dim:
                raise DimensionMismatchError(
                    f"Номер признака пня {stump.feature_index} вне 0..{self.dim - 1}"
                )

def _margin(ensemble: Ensemble, X: np.ndarray) -> np.ndarray:
    F = np.zeros(len(X))
    for stump, c in zip(ensemble.stumps, ensemble.weights):
        F += c * stump.predict(X)
    return F

def ensemble_score(ensemble: Ensemble, x: np.ndarray) -> float:
    """
    log r(x) = 2 F_A(x) + prior_log_odds.

    Raises:
        DimensionMismatchError: размерность x не совпадает с ансамблем
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (ensemble.dim,):
        raise DimensionMismatchError(f"Ансамбль ожидает размерность {ensemble.dim}, получено {x.shape}")
    F = 0.0
    for stump, c in zip(ensemble.stumps, ensemble.weights):
        F += c * stump.predict_one(x)
    return 2.0 * F + ensemble.prior_log_odds

def ensemble_score_batch(ensemble: Ensemble, X: np.ndarray) -> np.ndarray:
    """Векторизованный ensemble_score для строк X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != ensemble.dim:
        raise DimensionMismatchError(f"Ансамбль ожидает размерность {ensemble.dim}, получено {X.shape[1]}")
    return 2.0 * _margin(ensemble, X) + ensemble.prior_log_odds

def exponential_loss(ensemble: Ensemble, dataset: LabeledDataset) -> float:
    """Экспоненциальная потеря (1/(M+N)) sum exp(-y F_A(x)) на наборе."""
    X = dataset.pooled()
    y = np.concatenate([-np.ones(dataset.m), np.ones(dataset.n)])
    return float(np.mean(np.exp(-y * _margin(ensemble, X))))

def stump_weight(eps: float) -> float:
    """c = 1/2 log((1 - eps) / eps) с ограничением eps в [1e-10, 1 - 1e-10]."""
    eps = min(max(eps, EPS_CLAMP), 1.0 - EPS_CLAMP)
    return 0.5 * np.log((1.0 - eps) / eps)

class _SortedFeature:
    """Предвычисленный порядок значений признака и допустимые пороги."""

    def __init__(self, values: np.ndarray):
        self.order = np.argsort(values, kind="stable")
        v = values[self.order]
        n = len(v)
        # Позиции разреза k = 0..n: слева первые k отсортированных значений
        valid = np.ones(n + 1, dtype=bool)
        if n > 1:
            valid[1:n] = v[:-1] < v[1:]
        self.cuts = np.flatnonzero(valid)
        thresholds = np.empty(n + 1)
        thresholds[0] = -np.inf
        thresholds[n] = np.inf
        if n > 1:
            thresholds[1:n] = 0.5 * (v[:-1] + v[1:])
        self.thresholds = thresholds[self.cuts]

def _best_stump(features: List[_SortedFeature], y: np.ndarray,
                w: np.ndarray) -> Tuple[Stump, float]:
    """
    Пень с минимальной взвешенной ошибкой по всем признакам и порогам.

    При равенстве ошибок выбирается меньший номер признака, затем меньший
    порог, затем полярность +1.
    """
    pos = np.where(y > 0, w, 0.0)
    neg = np.where(y < 0, w, 0.0)
    total_pos = pos.sum()
    total_neg = neg.sum()

    best = None
    best_err = np.inf
    for j, feat in enumerate(features):
        cum_pos = np.concatenate([[0.0], np.cumsum(pos[feat.order])])[feat.cuts]
        cum_neg = np.concatenate([[0.0], np.cumsum(neg[feat.order])])[feat.cuts]
        # polarity +1: справа +1, слева -1
        err_plus = cum_pos + (total_neg - cum_neg)
        # polarity -1: слева +1, справа -1
        err_minus = cum_neg + (total_pos - cum_pos)

        k_plus = int(np.argmin(err_plus))
        k_minus = int(np.argmin(err_minus))
        if err_plus[k_plus] < err_minus[k_minus] or (
                err_plus[k_plus] == err_minus[k_minus] and k_plus <= k_minus):
            err, k, polarity = float(err_plus[k_plus]), k_plus, 1
        else:
            err, k, polarity = float(err_minus[k_minus]), k_minus, -1

        if err < best_err:
            best_err = err
            best = Stump(feature_index=j, threshold=float(feat.thresholds[k]), polarity=polarity)

    return best, best_err

def train_adaboost(train: LabeledDataset, rounds: int, seed: int,
                   prior0: float = 0.5) -> Ensemble:
    """
    Дискретный AdaBoost на решающих пнях.

    На каждом раунде выбирается пень с минимальной взвешенной ошибкой eps
    по всем признакам и серединам между соседними различными значениями
    (плюс пороги -inf/+inf), его вес c = 1/2 log((1 - eps)/eps), веса
    выборок умножаются на exp(-c y f(x)) и нормируются.

    Args:
        train: Обучающий набор (класс 1 -> y = +1, класс 0 -> y = -1)
        rounds: Число раундов (>= 1)
        seed: Seed запуска (обучение детерминировано, seed записывается в описание)
        prior0: Априорная вероятность H0

    Returns:
        Ensemble
    """
    if rounds < 1:
        raise ConfigError(f"Число раундов должно быть >= 1, получено {rounds}")
    if not 0.0 < prior0 < 1.0:
        raise ConfigError(f"prior0 должна быть в (0, 1), получено {prior0}")

    X = train.pooled()
    y = np.concatenate([-np.ones(train.m), np.ones(train.n)])
    w = np.full(len(X), 1.0 / len(X))
    features = [_SortedFeature(X[:, j]) for j in range(train.dim)]

    stumps: List[Stump] = []
    weights: List[float] = []
    losses: List[float] = []
    F = np.zeros(len(X))

    boost_logger.info(f"Обучение AdaBoost: {rounds} раундов, {len(X)} выборок, d={train.dim} (seed={seed})")
    for t in range(rounds):
        stump, _ = _best_stump(features, y, w)
        pred = stump.predict(X)
        eps = float(w[pred != y].sum())
        c = stump_weight(eps)
        if c <= 0.0:
            # eps = 0.5: ни один пень не лучше случайного угадывания
            boost_logger.warning(f"Раунд {t + 1}: eps={eps:.6g}, обучение остановлено досрочно")
            break

        stumps.append(stump)
        weights.append(c)
        F += c * pred
        losses.append(float(np.mean(np.exp(-y * F))))

        w = w * np.exp(-c * y * pred)
        w /= w.sum()
        boost_logger.debug(f"Раунд {t + 1}: признак {stump.feature_index}, порог {stump.threshold:.6g}, eps={eps:.6g}, c={c:.6g}")

    if not stumps:
        raise InfeasibleError(
            "AdaBoost не нашёл ни одного пня с ошибкой меньше 0.5",
            "Классы неразличимы: WaldBoost не может построить ансамбль"
        )

    boost_logger.info(f"AdaBoost завершён, итоговая экспоненциальная потеря {losses[-1]:.6g}")
    return Ensemble(stumps=tuple(stumps), weights=tuple(weights),
                    prior_log_odds=float(np.log(prior0 / (1.0 - prior0))),
                    dim=train.dim, loss_history=tuple(losses))

def ensemble_to_dict(ensemble: Ensemble) -> Dict[str, Any]:
    return {
        "kind": "ensemble",
        "prior_log_odds": ensemble.prior_log_odds,
        "dim": ensemble.dim,
        "stumps": [
            {"feature": s.feature_index, "threshold": s.threshold, "polarity": s.polarity, "weight": c}
            for s, c in zip(ensemble.stumps, ensemble.weights)
        ],
        "loss_history": list(ensemble.loss_history),
    }

def ensemble_from_dict(payload: Dict[str, Any]) -> Ensemble:
    try:
        stumps = [Stump(int(s["feature"]), float(s["threshold"]), int(s["polarity"])) for s in payload["stumps"]]
        weights = [float(s["weight"]) for s in payload["stumps"]]
        return Ensemble(stumps=tuple(stumps), weights=tuple(weights),
                        prior_log_odds=float(payload["prior_log_odds"]), dim=int(payload["dim"]),
                        loss_history=tuple(payload.get("loss_history", ())))
    except (KeyError, TypeError, ValueError) as e:
        raise DataFileError(f"Неверное описание ансамбля: {e}")

def save_ensemble(ensemble: Ensemble, path: str) -> None:
    """Сохраняет ансамбль в JSON."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(ensemble_to_dict(ensemble), f, indent=2)
    boost_logger.info(f"Ансамбль сохранён в {path} ({len(ensemble.stumps)} пней)")

def load_ensemble(path: str) -> Ensemble:
    """Загружает ансамбль из JSON."""
    if not os.path.exists(path):
        raise DataFileError(f"Файл ансамбля не найден: {path}", f"Файл ансамбля не найден: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("kind") != "ensemble":
        raise DataFileError(f"Файл {path} не является ансамблем WaldBoost")
    return ensemble_from_dict(payload)
