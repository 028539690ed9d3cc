"""
Базовый метод: оценка отношения плотностей через вариационную нижнюю
границу KL(p1 || p0).

    L(alpha) = mean_i g(x_i^(1)) - mean_j exp(g(x_j^(0))) + 1 - (lambda / 2) alpha^T K alpha

Без регуляризации максимум по всем функциям g достигается при
g = log(p1 / p0). Функция вогнута по alpha и максимизируется
градиентным подъёмом с линейным поиском Армихо из alpha = 0.
Ограничений нормировки нет.
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from config import (
    ARMIJO_INITIAL_STEP, ARMIJO_MAX_HALVINGS, ARMIJO_SHRINK, ARMIJO_SLOPE,
    DEFAULT_GRAD_TOL, DEFAULT_MAX_INNER, DEFAULT_MAX_STAGES, DEFAULT_REL_TOL,
)
from utils.data import LabeledDataset, split
from utils.exceptions import ConfigError
from utils.kernel import KernelModel, feature_matrix, kernel_matrix, pick_centers
from utils.logger import get_module_logger, get_run_logger
from utils.wkdrf import CrossValidationResult, FitDiagnostics, GridPoint, constraints, grid_search

# Настраиваем логгер для модуля KL
klfit_logger = get_module_logger('klfit')

@dataclass(frozen=True)
class KlFitConfig:
    """
    Параметры обучения по нижней границе KL.

    Attributes:
        sigma: Ширина ядра
        num_centers: Число центров C
        lam: Коэффициент регуляризации alpha^T K alpha
        seed: Seed выбора центров
        grad_tol, rel_tol: Допуски остановки
        max_iter: Бюджет итераций подъёма
    """
    sigma: float = 1.0
    num_centers: int = 25
    lam: float = 1e-3
    seed: int = 0
    grad_tol: float = DEFAULT_GRAD_TOL
    rel_tol: float = DEFAULT_REL_TOL
    max_iter: int = DEFAULT_MAX_INNER * DEFAULT_MAX_STAGES

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ConfigError(f"sigma должна быть положительной, получено {self.sigma}")
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise ConfigError(f"lambda должна быть неотрицательной, получено {self.lam}")
        if self.num_centers < 1 or self.max_iter < 1:
            raise ConfigError("Число центров и бюджет итераций должны быть >= 1")

def kl_objective(alpha: np.ndarray, F0: np.ndarray, F1: np.ndarray, lam: float, K: np.ndarray) -> float:
    """
    Нижняя граница KL с регуляризацией; переполнение экспоненты даёт -inf.

    Args:
        alpha: Коэффициенты
        F0: Признаки класса 0 (M x C)
        F1: Признаки класса 1 (N x C)
        lam: Коэффициент регуляризации
        K: Матрица ядра центров
    """
    alpha = np.asarray(alpha, dtype=float)
    g0 = F0 @ alpha
    with np.errstate(over="ignore"):
        mean_exp = float(np.exp(logsumexp(g0) - np.log(len(g0))))
    if not np.isfinite(mean_exp):
        return float("-inf")
    return float(np.mean(F1 @ alpha)) - mean_exp + 1.0 - 0.5 * lam * float(alpha @ K @ alpha)

def kl_gradient(alpha: np.ndarray, F0: np.ndarray, F1: np.ndarray, lam: float, K: np.ndarray) -> np.ndarray:
    """u1 - mean_j exp(g(x_j^(0))) phi(x_j^(0)) - lambda K alpha; в нуле равен u1 - u0."""
    alpha = np.asarray(alpha, dtype=float)
    g0 = F0 @ alpha
    w0 = np.exp(g0 - np.log(len(g0)))
    return F1.mean(axis=0) - F0.T @ w0 - lam * (K @ alpha)

AscentCallback = Callable[[int, np.ndarray, float], None]

def _ascend(F0: np.ndarray, F1: np.ndarray, K: np.ndarray, config: KlFitConfig,
            callback: Optional[AscentCallback] = None) -> Tuple[np.ndarray, int, str, float]:
    alpha = np.zeros(F0.shape[1])
    value = kl_objective(alpha, F0, F1, config.lam, K)
    stop = "budget"
    accepted = 0
    grad_norm = float("nan")
    while accepted < config.max_iter:
        grad = kl_gradient(alpha, F0, F1, config.lam, K)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= config.grad_tol:
            stop = "grad_tol"
            break

        step = ARMIJO_INITIAL_STEP
        candidate = None
        for _ in range(ARMIJO_MAX_HALVINGS):
            trial = alpha + step * grad
            trial_value = kl_objective(trial, F0, F1, config.lam, K)
            if trial_value >= value + ARMIJO_SLOPE * step * grad_norm ** 2:
                candidate = (trial, trial_value)
                break
            step *= ARMIJO_SHRINK
        if candidate is None:
            stop = "stalled"
            break

        alpha, new_value = candidate
        accepted += 1
        if callback is not None:
            callback(accepted, alpha, new_value)
        change = abs(new_value - value) / max(1.0, abs(value))
        value = new_value
        if change <= config.rel_tol:
            stop = "rel_tol"
            break
    klfit_logger.debug(f"Подъём: {accepted} итераций, остановка {stop}, |grad|={grad_norm:.3g}")
    return alpha, accepted, stop, grad_norm

def fit_kl(train: LabeledDataset, config: KlFitConfig, centers: Optional[np.ndarray] = None,
           callback: Optional[AscentCallback] = None) -> Tuple[KernelModel, FitDiagnostics]:
    """
    Максимизирует kl_objective градиентным подъёмом из alpha = 0.

    Args:
        train: Обучающий набор
        config: Параметры
        centers: Явные центры (общая геометрия с WKDRF)
        callback: Вызывается после каждой принятой итерации (номер, alpha, значение)

    Returns:
        (KernelModel, FitDiagnostics); при исчерпании бюджета converged = False
    """
    run_logger = get_run_logger("klfit", config.seed, "fit")
    if centers is None:
        centers = pick_centers(train, config.num_centers, config.seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))

    F0 = feature_matrix(train.class0, centers, config.sigma)
    F1 = feature_matrix(train.class1, centers, config.sigma)
    K = kernel_matrix(centers, config.sigma)
    run_logger.info(f"Обучение: M={train.m}, N={train.n}, C={len(centers)}, sigma={config.sigma}, lambda={config.lam}")

    alpha, iterations, stop, grad_norm = _ascend(F0, F1, K, config, callback)
    value = kl_objective(alpha, F0, F1, config.lam, K)
    c0, c1 = constraints(alpha, F0, F1)
    diagnostics = FitDiagnostics(
        method="klfit", objective=value, c0=c0, c1=c1,
        d01=-float(F0.mean(axis=0) @ alpha), d10=float(F1.mean(axis=0) @ alpha),
        stage_iterations=[iterations], stage_stops=[stop], init_path="zero",
        converged=stop != "budget", best_objective=value, grad_norm=grad_norm,
        sigma=config.sigma, lam=config.lam, num_centers=len(centers),
    )
    if not diagnostics.converged:
        run_logger.warning(f"Подъём исчерпал бюджет {config.max_iter} итераций")
    run_logger.info(f"Обучение завершено за {iterations} итераций ({stop}), граница KL {value:.6g}")

    model = KernelModel(centers=centers, sigma=config.sigma, alpha=alpha,
                        meta={"method": "klfit", "lambda": config.lam, "seed": config.seed})
    return model, diagnostics

def holdout_kl(model: KernelModel, holdout: LabeledDataset) -> float:
    """Нерегуляризованная нижняя граница KL на отложенной выборке."""
    g0 = model.log_ratio_batch(holdout.class0)
    g1 = model.log_ratio_batch(holdout.class1)
    with np.errstate(over="ignore"):
        mean_exp = float(np.exp(logsumexp(g0) - np.log(len(g0))))
    if not np.isfinite(mean_exp):
        return float("-inf")
    return float(np.mean(g1)) - mean_exp + 1.0

def cross_validate_kl(data: LabeledDataset, sigma_grid: Sequence[float], lambda_grid: Sequence[float],
                      holdout_fraction: float, seed: int, config: Optional[KlFitConfig] = None,
                      centers: Optional[np.ndarray] = None, threads: int = 1) -> CrossValidationResult:
    """
    Выбор (sigma, lambda) по максимуму нижней границы KL на отложенной выборке.

    При равных оценках выбирается меньшая sigma, затем меньшая lambda.
    """
    base = config or KlFitConfig(seed=seed)
    train, holdout = split(data, holdout_fraction, seed)
    if centers is None:
        centers = pick_centers(train, base.num_centers, seed)
    run_logger = get_run_logger("klfit", seed, "cross_validate")

    def evaluate(sigma: float, lam: float) -> GridPoint:
        model, diagnostics = fit_kl(train, replace(base, sigma=sigma, lam=lam), centers=centers)
        score = holdout_kl(model, holdout)
        run_logger.info(f"sigma={sigma}, lambda={lam}: граница KL на отложенной выборке {score:.6g}")
        return GridPoint(sigma, lam, score, diagnostics.converged)

    result = grid_search(sigma_grid, lambda_grid, evaluate, threads=threads, maximize=True)
    run_logger.info(f"Выбрано sigma={result.sigma}, lambda={result.lam}")
    return result
