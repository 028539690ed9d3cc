"""
Обучение WKDRF: коэффициенты модели ядра минимизируют верхнюю оценку
средней стоимости SPRT

    omega0 / D01 + omega1 / D10 + (lambda / 2) alpha^T K alpha,

где D01 = -u0^T alpha и D10 = u1^T alpha: эмпирические оценки
дивергенций, при ослабленных ограничениях нормировки

    c0 = mean_j exp(g(x_j^(0))) - 1 <= 0,
    c1 = mean_i exp(-g(x_i^(1))) - 1 <= 0.

Задача выпуклая и решается методом логарифмических барьеров с
градиентным спуском и линейным поиском Армихо внутри каждого этапа.
Спуск ведётся в метрике P = (F0^T F0 / M + F1^T F1 / N) / 2 + lambda K
плюс ранг-один члены барьера mu grad c grad c^T / c^2; P пересчитывается
раз в METRIC_REFRESH итераций, гессиан цели не вычисляется.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from config import (
    ARMIJO_INITIAL_STEP, ARMIJO_MAX_HALVINGS, ARMIJO_SHRINK, ARMIJO_SLOPE,
    DEFAULT_BARRIER_FACTOR, DEFAULT_GRAD_TOL, DEFAULT_MAX_INNER, DEFAULT_MAX_STAGES,
    DEFAULT_REL_TOL, METRIC_REFRESH, METRIC_RIDGE,
)
from utils.data import LabeledDataset, split
from utils.exceptions import ConfigError, DomainViolationError, InfeasibleError
from utils.kernel import KernelModel, feature_matrix, kernel_matrix, pick_centers
from utils.logger import get_module_logger, get_run_logger
from utils.sprt import ErrorTargets, cost_brackets

# Настраиваем логгер для модуля WKDRF
wkdrf_logger = get_module_logger('wkdrf')

MAXIMIN_STEPS = 200
INIT_MAX_HALVINGS = 200

@dataclass(frozen=True)
class WkdrfConfig:
    """
    Параметры обучения WKDRF.

    Attributes:
        target_pf: Целевая вероятность ложной тревоги
        target_pm: Целевая вероятность пропуска
        prior0: Априорная вероятность H0 (prior1 = 1 - prior0)
        lam: Коэффициент регуляризации lambda >= 0
        sigma: Ширина ядра
        num_centers: Число центров C
        seed: Seed выбора центров
        grad_tol, rel_tol, max_stages, barrier_factor, max_inner: Допуски решателя
    """
    target_pf: float = 0.1
    target_pm: float = 0.1
    prior0: float = 0.5
    lam: float = 1e-3
    sigma: float = 1.0
    num_centers: int = 25
    seed: int = 0
    grad_tol: float = DEFAULT_GRAD_TOL
    rel_tol: float = DEFAULT_REL_TOL
    max_stages: int = DEFAULT_MAX_STAGES
    barrier_factor: float = DEFAULT_BARRIER_FACTOR
    max_inner: int = DEFAULT_MAX_INNER

    def __post_init__(self):
        ErrorTargets(self.target_pf, self.target_pm)
        if not 0.0 < self.prior0 < 1.0:
            raise ConfigError(f"prior0 должна быть в (0, 1), получено {self.prior0}")
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise ConfigError(f"lambda должна быть неотрицательной, получено {self.lam}")
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ConfigError(f"sigma должна быть положительной, получено {self.sigma}")
        if self.num_centers < 1:
            raise ConfigError(f"Число центров должно быть >= 1, получено {self.num_centers}")
        if self.max_stages < 1 or self.max_inner < 1 or self.barrier_factor <= 1.0:
            raise ConfigError("Неверные параметры барьерного решателя")

    @property
    def prior1(self) -> float:
        return 1.0 - self.prior0

@dataclass
class FitDiagnostics:
    """
    Диагностика обучения модели ядра.

    Attributes:
        method: wkdrf или klfit
        objective: Значение цели в возвращённой точке
        c0, c1: Невязки ограничений нормировки
        d01, d10: Эмпирические оценки дивергенций
        stage_iterations: Число внутренних итераций на каждом этапе
        stage_stops: Причина остановки каждого этапа
        init_path: Способ построения начальной точки
        converged: Все этапы остановлены по критерию, а не по бюджету
        best_objective: Лучшее значение цели среди допустимых итераций
        grad_norm: Норма градиента последней подзадачи
    """
    method: str
    objective: float
    c0: float
    c1: float
    d01: float
    d10: float
    stage_iterations: List[int] = field(default_factory=list)
    stage_stops: List[str] = field(default_factory=list)
    init_path: str = ""
    converged: bool = True
    best_objective: float = float("nan")
    grad_norm: float = float("nan")
    omega0: Optional[float] = None
    omega1: Optional[float] = None
    sigma: Optional[float] = None
    lam: Optional[float] = None
    num_centers: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = dict(self.__dict__)
        payload["lambda"] = payload.pop("lam")
        return payload

def weights_from_targets(pf: float, pm: float, pi0: float = 0.5,
                         pi1: Optional[float] = None) -> Tuple[float, float]:
    """
    Веса стоимости omega0 = pi0 * bracket0, omega1 = pi1 * bracket1.

    Args:
        pf, pm: Целевые ошибки в (0, 0.5)
        pi0, pi1: Априорные вероятности гипотез

    Returns:
        (omega0, omega1), оба строго положительны

    Raises:
        ConfigError: целевые ошибки или априорные вероятности вне диапазона
    """
    if pi1 is None:
        pi1 = 1.0 - pi0
    if not (pi0 > 0.0 and pi1 > 0.0):
        raise ConfigError(f"Априорные вероятности должны быть положительными: {pi0}, {pi1}")
    bracket0, bracket1 = cost_brackets(ErrorTargets(pf, pm))
    return pi0 * bracket0, pi1 * bracket1

def _divergences(alpha: np.ndarray, u0: np.ndarray, u1: np.ndarray) -> Tuple[float, float]:
    d01 = -float(np.dot(u0, alpha))
    d10 = float(np.dot(u1, alpha))
    if not (d01 > 0.0 and d10 > 0.0):
        raise DomainViolationError(f"alpha вне области: D01={d01:.6g}, D10={d10:.6g}")
    return d01, d10

def objective(alpha: np.ndarray, u0: np.ndarray, u1: np.ndarray, omega0: float, omega1: float,
              lam: float, K: np.ndarray) -> float:
    """
    omega0 / D01 + omega1 / D10 + (lambda / 2) alpha^T K alpha.

    Raises:
        DomainViolationError: D01 <= 0 или D10 <= 0
    """
    alpha = np.asarray(alpha, dtype=float)
    d01, d10 = _divergences(alpha, u0, u1)
    return omega0 / d01 + omega1 / d10 + 0.5 * lam * float(alpha @ K @ alpha)

def gradient(alpha: np.ndarray, u0: np.ndarray, u1: np.ndarray, omega0: float, omega1: float,
             lam: float, K: np.ndarray) -> np.ndarray:
    """omega0 u0 / D01^2 - omega1 u1 / D10^2 + lambda K alpha."""
    alpha = np.asarray(alpha, dtype=float)
    d01, d10 = _divergences(alpha, u0, u1)
    return omega0 * u0 / d01 ** 2 - omega1 * u1 / d10 ** 2 + lam * (K @ alpha)

def _log_mean_exp(values: np.ndarray) -> float:
    return float(logsumexp(values) - np.log(len(values)))

def constraints(alpha: np.ndarray, F0: np.ndarray, F1: np.ndarray) -> Tuple[float, float]:
    """
    Невязки нормировки (c0, c1); точка допустима при c0 <= 0 и c1 <= 0.

    Args:
        alpha: Коэффициенты
        F0: Признаки класса 0 (M x C)
        F1: Признаки класса 1 (N x C)

    Returns:
        (c0, c1); переполнение даёт +inf
    """
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(over="ignore"):
        c0 = float(np.expm1(_log_mean_exp(F0 @ alpha)))
        c1 = float(np.expm1(_log_mean_exp(-(F1 @ alpha))))
    return c0, c1

def constraint_gradients(alpha: np.ndarray, F0: np.ndarray, F1: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Градиенты c0 и c1 по alpha."""
    alpha = np.asarray(alpha, dtype=float)
    g0 = F0 @ alpha
    g1 = -(F1 @ alpha)
    w0 = np.exp(g0 - np.log(len(g0)))
    w1 = np.exp(g1 - np.log(len(g1)))
    return F0.T @ w0, -(F1.T @ w1)

@dataclass(frozen=True, eq=False)
class WkdrfProblem:
    """Предвычисленные величины выпуклой программы для фиксированных центров и sigma."""
    F0: np.ndarray
    F1: np.ndarray
    K: np.ndarray
    omega0: float
    omega1: float
    lam: float

    @property
    def u0(self) -> np.ndarray:
        return self.F0.mean(axis=0)

    @property
    def u1(self) -> np.ndarray:
        return self.F1.mean(axis=0)

    @classmethod
    def build(cls, train: LabeledDataset, centers: np.ndarray, sigma: float,
              omega0: float, omega1: float, lam: float) -> "WkdrfProblem":
        return cls(
            F0=feature_matrix(train.class0, centers, sigma),
            F1=feature_matrix(train.class1, centers, sigma),
            K=kernel_matrix(centers, sigma),
            omega0=float(omega0), omega1=float(omega1), lam=float(lam),
        )

    def objective(self, alpha: np.ndarray) -> float:
        return objective(alpha, self.u0, self.u1, self.omega0, self.omega1, self.lam, self.K)

def barrier_objective(problem: WkdrfProblem, alpha: np.ndarray, mu: float) -> float:
    """
    objective(alpha) - mu [log(-c0) + log(-c1)].

    Raises:
        DomainViolationError: alpha вне открытой области или ограничение нарушено
    """
    value = problem.objective(alpha)
    c0, c1 = constraints(alpha, problem.F0, problem.F1)
    if not (c0 < 0.0 and c1 < 0.0):
        raise DomainViolationError(f"Ограничение нарушено: c0={c0:.6g}, c1={c1:.6g}")
    return value - mu * (np.log(-c0) + np.log(-c1))

def barrier_gradient(problem: WkdrfProblem, alpha: np.ndarray, mu: float) -> np.ndarray:
    """grad objective - mu [grad c0 / c0 + grad c1 / c1]."""
    grad = gradient(alpha, problem.u0, problem.u1, problem.omega0, problem.omega1, problem.lam, problem.K)
    c0, c1 = constraints(alpha, problem.F0, problem.F1)
    if not (c0 < 0.0 and c1 < 0.0):
        raise DomainViolationError(f"Ограничение нарушено: c0={c0:.6g}, c1={c1:.6g}")
    dc0, dc1 = constraint_gradients(alpha, problem.F0, problem.F1)
    return grad - mu * (dc0 / c0 + dc1 / c1)

def _maximin_direction(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """
    Проекционный субградиентный подъём min(-u0^T d, u1^T d) на единичной сфере.
    """
    start = u1 - u0
    if np.linalg.norm(start) == 0.0:
        start = np.zeros_like(u0)
        start[0] = 1.0
    d = start / np.linalg.norm(start)
    best_d, best_value = d, min(-u0 @ d, u1 @ d)
    for k in range(1, MAXIMIN_STEPS + 1):
        sub = -u0 if -u0 @ d <= u1 @ d else u1
        norm = np.linalg.norm(sub)
        if norm == 0.0:
            break
        d = d + sub / (norm * np.sqrt(k))
        d = d / np.linalg.norm(d)
        value = min(-u0 @ d, u1 @ d)
        if value > best_value:
            best_d, best_value = d, value
    return best_d

def _init_alpha(u0: np.ndarray, u1: np.ndarray, F0: Optional[np.ndarray] = None,
                F1: Optional[np.ndarray] = None) -> Tuple[np.ndarray, str]:
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    n0, n1 = np.linalg.norm(u0), np.linalg.norm(u1)
    if n0 == 0.0 or n1 == 0.0:
        raise InfeasibleError("Средний вектор признаков одного из классов нулевой",
                              "Классы неразличимы: начальная точка не найдена")

    path = "equipartition"
    d = -u0 / n0 + u1 / n1
    norm = np.linalg.norm(d)
    if norm > 0.0:
        d = d / norm
    if norm == 0.0 or not (-u0 @ d > 0.0 and u1 @ d > 0.0):
        path = "maximin"
        d = _maximin_direction(u0, u1)
        if not -u0 @ d > 0.0:
            raise InfeasibleError("Не найдено направление с -u0^T alpha > 0 (D01 > 0)",
                                  "Классы неразличимы: начальная точка не найдена")
        if not u1 @ d > 0.0:
            raise InfeasibleError("Не найдено направление с u1^T alpha > 0 (D10 > 0)",
                                  "Классы неразличимы: начальная точка не найдена")

    if F0 is None or F1 is None:
        return d, path

    t = 1.0
    for _ in range(INIT_MAX_HALVINGS):
        alpha = t * d
        c0, c1 = constraints(alpha, F0, F1)
        if c0 < 0.0 and c1 < 0.0 and -u0 @ alpha > 0.0 and u1 @ alpha > 0.0:
            return alpha, path
        t *= 0.5
    failed = "c0 < 0" if not c0 < 0.0 else "c1 < 0"
    raise InfeasibleError(f"Начальная точка не найдена: условие {failed} не выполнено",
                          "Не удалось найти строго допустимую начальную точку")

def init_alpha(u0: np.ndarray, u1: np.ndarray, F0: Optional[np.ndarray] = None,
               F1: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Строго допустимая начальная точка.

    Направление d = -u0/|u0| + u1/|u1| (нормированное); если оно не даёт
    D01 > 0 и D10 > 0, используется направление, максимизирующее
    min(-u0^T d, u1^T d). Масштаб t делится пополам от 1, пока не
    выполнены c0 < 0 и c1 < 0 (если переданы признаки классов).

    Raises:
        InfeasibleError: строго допустимая точка не найдена
    """
    return _init_alpha(u0, u1, F0, F1)[0]

IterateCallback = Callable[[int, float, np.ndarray, float], None]

@dataclass
class BarrierResult:
    """Итог барьерного решателя."""
    alpha: np.ndarray
    stage_iterations: List[int]
    stage_stops: List[str]
    converged: bool
    grad_norm: float
    best_alpha: np.ndarray
    best_objective: float

def _data_metric(problem: WkdrfProblem) -> np.ndarray:
    """Постоянная часть метрики спуска: средняя кривизна признаков плюс lambda K."""
    F0, F1 = problem.F0, problem.F1
    return 0.5 * (F0.T @ F0 / len(F0) + F1.T @ F1 / len(F1)) + problem.lam * problem.K

def _metric_factor(problem: WkdrfProblem, base: np.ndarray, alpha: np.ndarray, mu: float):
    """Разложение Холецкого метрики в текущей точке."""
    c0, c1 = constraints(alpha, problem.F0, problem.F1)
    dc0, dc1 = constraint_gradients(alpha, problem.F0, problem.F1)
    metric = base + mu * (np.outer(dc0, dc0) / c0 ** 2 + np.outer(dc1, dc1) / c1 ** 2)
    scale = max(float(np.trace(metric)) / len(metric), np.finfo(float).tiny)
    metric[np.diag_indices_from(metric)] += METRIC_RIDGE * scale
    return cho_factor(metric)

def _armijo_step(problem: WkdrfProblem, alpha: np.ndarray, value: float, direction: np.ndarray,
                 decrement: float, mu: float) -> Optional[Tuple[np.ndarray, float]]:
    """Шаг спуска с возвратом; недопустимые точки отклоняются."""
    step = ARMIJO_INITIAL_STEP
    slope = ARMIJO_SLOPE * decrement
    for _ in range(ARMIJO_MAX_HALVINGS):
        candidate = alpha + step * direction
        try:
            candidate_value = barrier_objective(problem, candidate, mu)
        except DomainViolationError:
            step *= ARMIJO_SHRINK
            continue
        if candidate_value <= value - step * slope:
            return candidate, candidate_value
        step *= ARMIJO_SHRINK
    return None

def solve_barrier(problem: WkdrfProblem, alpha0: np.ndarray, config: WkdrfConfig,
                  callback: Optional[IterateCallback] = None) -> BarrierResult:
    """
    Метод логарифмических барьеров: mu = 1, 1/factor, ... (max_stages этапов).

    Направление спуска d = -P^{-1} grad. Этап останавливается по норме
    градиента (grad_tol), когда ожидаемое убывание grad^T P^{-1} grad / 2
    не больше rel_tol * max(1, |цель|) (rel_tol), или когда линейный поиск
    не находит шага (stalled, предел машинной точности). Исчерпание
    max_inner итераций отмечает решение как несошедшееся.
    """
    alpha = np.asarray(alpha0, dtype=float).copy()
    best_alpha, best_objective = alpha.copy(), problem.objective(alpha)
    base = _data_metric(problem)
    iterations: List[int] = []
    stops: List[str] = []
    grad_norm = float("nan")

    for stage in range(config.max_stages):
        mu = 1.0 / config.barrier_factor ** stage
        value = barrier_objective(problem, alpha, mu)
        stop = "budget"
        accepted = 0
        factor = None
        while accepted < config.max_inner:
            grad = barrier_gradient(problem, alpha, mu)
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm <= config.grad_tol:
                stop = "grad_tol"
                break
            if factor is None or accepted % METRIC_REFRESH == 0:
                factor = _metric_factor(problem, base, alpha, mu)
            direction = -cho_solve(factor, grad)
            decrement = float(-grad @ direction)
            if 0.5 * decrement <= config.rel_tol * max(1.0, abs(value)):
                stop = "rel_tol"
                break
            result = _armijo_step(problem, alpha, value, direction, decrement, mu)
            if result is None:
                stop = "stalled"
                break
            alpha, value = result
            accepted += 1
            if callback is not None:
                callback(stage, mu, alpha, value)
            current = problem.objective(alpha)
            if current < best_objective:
                best_alpha, best_objective = alpha.copy(), current
        if stop == "budget":
            grad_norm = float(np.linalg.norm(barrier_gradient(problem, alpha, mu)))
        iterations.append(accepted)
        stops.append(stop)
        wkdrf_logger.debug(f"Этап {stage + 1}: mu={mu:.1e}, итераций {accepted}, остановка {stop}, цель {value:.8g}")

    return BarrierResult(alpha=alpha, stage_iterations=iterations, stage_stops=stops,
                         converged="budget" not in stops, grad_norm=grad_norm,
                         best_alpha=best_alpha, best_objective=best_objective)

def fit(train: LabeledDataset, config: WkdrfConfig, centers: Optional[np.ndarray] = None,
        callback: Optional[IterateCallback] = None) -> Tuple[KernelModel, FitDiagnostics]:
    """
    Обучает модель WKDRF.

    Args:
        train: Обучающий набор
        config: Параметры обучения
        centers: Явные центры (общая геометрия нескольких методов);
                 по умолчанию выбираются pick_centers(train, C, seed)
        callback: Вызывается после каждой принятой итерации (этап, mu, alpha, значение подзадачи)

    Returns:
        (KernelModel, FitDiagnostics); если бюджет итераций исчерпан,
        возвращается лучшая допустимая итерация с converged = False

    Raises:
        InfeasibleError: строго допустимая начальная точка не найдена
    """
    run_logger = get_run_logger("wkdrf", config.seed, "fit")
    if centers is None:
        centers = pick_centers(train, config.num_centers, config.seed)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))

    omega0, omega1 = weights_from_targets(config.target_pf, config.target_pm, config.prior0, config.prior1)
    problem = WkdrfProblem.build(train, centers, config.sigma, omega0, omega1, config.lam)
    run_logger.info(
        f"Обучение: M={train.m}, N={train.n}, C={len(centers)}, sigma={config.sigma}, "
        f"lambda={config.lam}, omega=({omega0:.6g}, {omega1:.6g})"
    )

    alpha0, init_path = _init_alpha(problem.u0, problem.u1, problem.F0, problem.F1)
    run_logger.info(f"Начальная точка ({init_path}), цель {problem.objective(alpha0):.6g}")

    result = solve_barrier(problem, alpha0, config, callback)
    alpha = result.alpha if result.converged else result.best_alpha
    if not result.converged:
        run_logger.warning(
            f"Решатель НЕ СОШЁЛСЯ: бюджет итераций исчерпан (по этапам: {result.stage_iterations}, "
            f"остановки {result.stage_stops}, норма градиента {result.grad_norm:.3g}), "
            f"возвращена лучшая допустимая итерация"
        )

    final_objective = problem.objective(alpha)
    c0, c1 = constraints(alpha, problem.F0, problem.F1)
    d01, d10 = _divergences(alpha, problem.u0, problem.u1)
    diagnostics = FitDiagnostics(
        method="wkdrf", objective=final_objective, c0=c0, c1=c1, d01=d01, d10=d10,
        stage_iterations=result.stage_iterations, stage_stops=result.stage_stops,
        init_path=init_path, converged=result.converged, best_objective=result.best_objective,
        grad_norm=result.grad_norm, omega0=omega0, omega1=omega1,
        sigma=config.sigma, lam=config.lam, num_centers=len(centers),
    )
    run_logger.info(
        f"Обучение завершено: цель {final_objective:.6g}, D01={d01:.6g}, D10={d10:.6g}, "
        f"c0={c0:.3g}, c1={c1:.3g}"
    )

    model = KernelModel(centers=centers, sigma=config.sigma, alpha=alpha,
                        meta={"method": "wkdrf", "lambda": config.lam, "target_pf": config.target_pf,
                              "target_pm": config.target_pm, "prior0": config.prior0, "seed": config.seed})
    return model, diagnostics

def holdout_bound(model: KernelModel, holdout: LabeledDataset, omega0: float, omega1: float) -> float:
    """
    Нерегуляризованная оценка стоимости omega0/D01 + omega1/D10 на отложенной выборке.

    Неположительная оценка дивергенции даёт +inf.
    """
    d01 = -float(np.mean(model.log_ratio_batch(holdout.class0)))
    d10 = float(np.mean(model.log_ratio_batch(holdout.class1)))
    if not (d01 > 0.0 and d10 > 0.0):
        return float("inf")
    return omega0 / d01 + omega1 / d10

@dataclass(frozen=True)
class GridPoint:
    """Одна точка сетки кросс-валидации."""
    sigma: float
    lam: float
    score: float
    converged: bool
    error: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"sigma": self.sigma, "lambda": self.lam, "score": self.score,
                "converged": self.converged, "error": self.error}

@dataclass
class CrossValidationResult:
    """Выбранная пара (sigma, lambda) и таблица оценок на отложенной выборке."""
    sigma: float
    lam: float
    table: List[GridPoint]

    def to_dict(self) -> Dict[str, Any]:
        return {"sigma": self.sigma, "lambda": self.lam, "table": [p.to_dict() for p in self.table]}

def grid_search(sigma_grid: Sequence[float], lambda_grid: Sequence[float],
                evaluate: Callable[[float, float], GridPoint], threads: int = 1,
                maximize: bool = False) -> CrossValidationResult:
    """
    Перебор сетки (sigma, lambda) и детерминированный выбор лучшей точки.

    При равных оценках выбирается меньшая sigma, затем меньшая lambda.

    Raises:
        ConfigError: пустая сетка
        InfeasibleError: все точки сетки недопустимы
    """
    if not sigma_grid or not lambda_grid:
        raise ConfigError("Сетки sigma и lambda не должны быть пустыми")
    grid = [(float(s), float(l)) for s in sigma_grid for l in lambda_grid]
    if threads <= 1:
        table = [evaluate(s, l) for s, l in grid]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(lambda point: evaluate(*point), grid))

    sign = -1.0 if maximize else 1.0
    finite = [p for p in table if np.isfinite(p.score)]
    if not finite:
        raise InfeasibleError("Все точки сетки кросс-валидации недопустимы",
                              "Ни одна пара (sigma, lambda) не дала допустимого решения")
    best = min(finite, key=lambda p: (sign * p.score, p.sigma, p.lam))
    return CrossValidationResult(sigma=best.sigma, lam=best.lam, table=table)

def cross_validate(data: LabeledDataset, sigma_grid: Sequence[float], lambda_grid: Sequence[float],
                   holdout_fraction: float, seed: int, config: Optional[WkdrfConfig] = None,
                   centers: Optional[np.ndarray] = None, threads: int = 1) -> CrossValidationResult:
    """
    Выбор (sigma, lambda) по нерегуляризованной оценке стоимости на отложенной выборке.

    Args:
        data: Набор для кросс-валидации
        sigma_grid, lambda_grid: Сетки
        holdout_fraction: Доля отложенной части
        seed: Seed разбиения и выбора центров
        config: Остальные параметры обучения (целевые ошибки, допуски)
        centers: Явные центры; по умолчанию выбираются из обучающей части
        threads: Число потоков для точек сетки

    Returns:
        CrossValidationResult
    """
    base = config or WkdrfConfig(seed=seed)
    train, holdout = split(data, holdout_fraction, seed)
    if centers is None:
        centers = pick_centers(train, base.num_centers, seed)
    omega0, omega1 = weights_from_targets(base.target_pf, base.target_pm, base.prior0, base.prior1)
    run_logger = get_run_logger("wkdrf", seed, "cross_validate")

    def evaluate(sigma: float, lam: float) -> GridPoint:
        try:
            model, diagnostics = fit(train, replace(base, sigma=sigma, lam=lam), centers=centers)
        except InfeasibleError as e:
            run_logger.info(f"sigma={sigma}, lambda={lam}: недопустимо ({e.message})")
            return GridPoint(sigma, lam, float("inf"), False, e.message)
        score = holdout_bound(model, holdout, omega0, omega1)
        run_logger.info(f"sigma={sigma}, lambda={lam}: оценка на отложенной выборке {score:.6g}")
        return GridPoint(sigma, lam, score, diagnostics.converged)

    result = grid_search(sigma_grid, lambda_grid, evaluate, threads=threads)
    run_logger.info(f"Выбрано sigma={result.sigma}, lambda={result.lam}")
    return result
