"""
Единый контракт оценщиков логарифма отношения плотностей.

Оценщик (scorer) служит единственной связью между методами обучения и движком
SPRT: score(x) интерпретируется как оценка log(p1(x)/p0(x)). Здесь же
точный оракул для синтетических смесей и диагностика нормировки.
"""
import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.special import logsumexp

from utils.data import GaussianMixtureSpec, LabeledDataset
from utils.exceptions import DataFileError, DimensionMismatchError
from utils.kernel import KernelModel, log_ratio, model_from_dict
from utils.logger import get_module_logger
from utils.waldboost import Ensemble, ensemble_from_dict, ensemble_score, ensemble_score_batch

# Настраиваем логгер для модуля оценщиков
scorer_logger = get_module_logger('scorer')

class Scorer(ABC):
    """
    Оценщик log(p1(x)/p0(x)).

    Наследники реализуют score_batch; score по умолчанию вычисляется
    через него. Оценщики неизменяемы после создания.
    """
    dim: Optional[int] = None

    @abstractmethod
    def score_batch(self, X: np.ndarray) -> np.ndarray:
        """Значения оценки для строк X (n x d)."""

    def score(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.score_batch(x[None, :])[0])

    @property
    @abstractmethod
    def descriptor(self) -> Dict[str, Any]:
        """Человекочитаемое описание: метод и гиперпараметры."""

    @property
    def name(self) -> str:
        return str(self.descriptor.get("name", self.descriptor.get("method", "scorer")))

    def _check_dim(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.dim is not None and X.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"Оценщик {self.name} ожидает размерность {self.dim}, получено {X.shape[1]}"
            )
        return X

class OracleScorer(Scorer):
    """Точный log p1(x) - log p0(x) для известных гауссовых смесей."""

    def __init__(self, spec0: GaussianMixtureSpec, spec1: GaussianMixtureSpec):
        if spec0.dim != spec1.dim:
            raise DimensionMismatchError(f"Размерности смесей различны: {spec0.dim} и {spec1.dim}")
        self.spec0 = spec0
        self.spec1 = spec1
        self.dim = spec0.dim

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_dim(X)
        return self.spec1.log_density(X) - self.spec0.log_density(X)

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {"name": "oracle", "method": "oracle",
                "components0": len(self.spec0.components), "components1": len(self.spec1.components)}

class ModelScorer(Scorer):
    """Оценщик по модели ядра: score(x) = log_ratio(model, x)."""

    def __init__(self, model: KernelModel, name: Optional[str] = None):
        self.model = model
        self.dim = model.dim
        self._name = name or str(model.meta.get("method", "kernel"))

    def score(self, x: np.ndarray) -> float:
        return log_ratio(self.model, x)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_dim(X)
        return self.model.log_ratio_batch(X)

    @property
    def descriptor(self) -> Dict[str, Any]:
        info = {"name": self._name, "num_centers": self.model.num_centers, "sigma": self.model.sigma}
        info.update({k: v for k, v in self.model.meta.items() if k not in info})
        return info

class EnsembleScorer(Scorer):
    """Оценщик WaldBoost: 2 F_A(x) + log(pi0 / pi1)."""

    def __init__(self, ensemble: Ensemble, name: str = "waldboost"):
        self.ensemble = ensemble
        self.dim = ensemble.dim
        self._name = name

    def score(self, x: np.ndarray) -> float:
        return ensemble_score(self.ensemble, x)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_dim(X)
        return ensemble_score_batch(self.ensemble, X)

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {"name": self._name, "method": "waldboost", "rounds": len(self.ensemble.stumps),
                "prior_log_odds": self.ensemble.prior_log_odds}

class ConstantScorer(Scorer):
    """Постоянная оценка (контрольные прогоны)."""

    def __init__(self, value: float, dim: Optional[int] = None):
        self.value = float(value)
        self.dim = dim

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._check_dim(X)
        return np.full(len(X), self.value)

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {"name": f"constant({self.value:g})", "method": "constant", "value": self.value}

class ScaledScorer(Scorer):
    """factor * base(x), например намеренно неверно масштабированный оракул."""

    def __init__(self, base: Scorer, factor: float):
        self.base = base
        self.factor = float(factor)
        self.dim = base.dim

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return self.factor * self.base.score_batch(X)

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {"name": f"{self.base.name}*{self.factor:g}", "method": "scaled", "factor": self.factor}

class ShiftedScorer(Scorer):
    """base(x) + shift."""

    def __init__(self, base: Scorer, shift: float):
        self.base = base
        self.shift = float(shift)
        self.dim = base.dim

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return self.base.score_batch(X) + self.shift

    @property
    def descriptor(self) -> Dict[str, Any]:
        return {"name": f"{self.base.name}+{self.shift:g}", "method": "shifted", "shift": self.shift}

def oracle_scorer(spec0: GaussianMixtureSpec, spec1: GaussianMixtureSpec) -> OracleScorer:
    """Точный оценщик для синтетических плотностей."""
    return OracleScorer(spec0, spec1)

def model_scorer(model: KernelModel, name: Optional[str] = None) -> ModelScorer:
    """Оценщик по обученной модели ядра."""
    return ModelScorer(model, name=name)

def load_scorer(path: str) -> Scorer:
    """
    Строит оценщик из JSON модели любого вида (kernel или ensemble).

    Raises:
        DataFileError: файл отсутствует или вид модели неизвестен
    """
    if not os.path.exists(path):
        raise DataFileError(f"Файл модели не найден: {path}", f"Файл модели не найден: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)

    kind = payload.get("kind", "kernel")
    name = os.path.splitext(os.path.basename(path))[0]
    if kind == "kernel":
        model = model_from_dict(payload)
        return model_scorer(model, name=str(model.meta.get("method", name)))
    if kind == "ensemble":
        return EnsembleScorer(ensemble_from_dict(payload))
    raise DataFileError(f"Неизвестный вид модели '{kind}' в {path}")

@dataclass
class NormalizationReport:
    """
    Эмпирические средние E[r | H0] и E[1/r | H1] на выборке.

    При точной нормировке обе величины равны 1.
    """
    mean_ratio_h0: float
    mean_invratio_h1: float
    m: int
    n: int

    @property
    def residuals(self) -> tuple:
        return self.mean_ratio_h0 - 1.0, self.mean_invratio_h1 - 1.0

    def to_dict(self) -> Dict[str, Any]:
        c0, c1 = self.residuals
        return {"mean_ratio_h0": self.mean_ratio_h0, "mean_invratio_h1": self.mean_invratio_h1,
                "residual_h0": c0, "residual_h1": c1, "m": self.m, "n": self.n}

def _log_mean_exp(values: np.ndarray) -> float:
    return float(logsumexp(values) - np.log(len(values)))

def normalization_diagnostics(scorer: Scorer, data: LabeledDataset) -> NormalizationReport:
    """
    Проверка нормировки оценщика на размеченной выборке.

    mean_ratio_h0 = (1/M) sum_j exp(score(x_j^(0))),
    mean_invratio_h1 = (1/N) sum_i exp(-score(x_i^(1))).
    Вычисляется в логарифмической шкале; переполнение даёт +inf.
    """
    s0 = np.asarray(scorer.score_batch(data.class0), dtype=float)
    s1 = np.asarray(scorer.score_batch(data.class1), dtype=float)
    with np.errstate(over="ignore"):
        mean_ratio = float(np.exp(_log_mean_exp(s0)))
        mean_inv = float(np.exp(_log_mean_exp(-s1)))

    report = NormalizationReport(mean_ratio_h0=mean_ratio, mean_invratio_h1=mean_inv, m=data.m, n=data.n)
    scorer_logger.info(
        f"Нормировка {scorer.name}: E[r|H0]={mean_ratio:.6g}, E[1/r|H1]={mean_inv:.6g}"
    )
    return report
