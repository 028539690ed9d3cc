"""
Движок последовательного критерия отношения вероятностей (SPRT).

Пороги по целевым ошибкам, обратные формулы ошибок, теоретическая
стоимость выборки и выполнение обученного SPRT над потоком выборок.
Статистика накапливается как сумма оценок; остановка и решение H0 при
сумме <= a, H1 при сумме >= b.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from utils.data import MixtureSource
from utils.exceptions import ConfigError, SprtAbortError
from utils.logger import get_module_logger
from utils.seeding import make_rng

# Настраиваем логгер для модуля SPRT
sprt_logger = get_module_logger('sprt')

FIRST_BLOCK = 16
MAX_BLOCK = 1024

class Decision(IntEnum):
    H0 = 0
    H1 = 1

@dataclass(frozen=True)
class ErrorTargets:
    """Целевые ошибки: P_F (ложная тревога) и P_M (пропуск)."""
    pf: float
    pm: float

    def __post_init__(self):
        if not (0.0 < self.pf < 0.5 and 0.0 < self.pm < 0.5):
            raise ConfigError(f"Целевые ошибки должны лежать в (0, 0.5): pf={self.pf}, pm={self.pm}")
        if self.pf + self.pm >= 1.0:
            raise ConfigError(f"Сумма целевых ошибок должна быть < 1: pf={self.pf}, pm={self.pm}")

@dataclass(frozen=True)
class Thresholds:
    """Пороги остановки a < 0 < b."""
    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < 0.0 < self.b):
            raise ConfigError(f"Пороги должны удовлетворять a < 0 < b: a={self.a}, b={self.b}")

@dataclass(frozen=True)
class SprtOutcome:
    """Итог одного прогона: решение, момент остановки, статистика, признак усечения."""
    decision: Decision
    n_samples: int
    final_stat: float
    truncated: bool

@dataclass(frozen=True)
class TheoreticalCost:
    """Ожидаемые моменты остановки E[N|H0], E[N|H1] и взвешенная стоимость."""
    n0: float
    n1: float
    total: float

@dataclass
class WaldIdentityReport:
    """
    Оценки Монте-Карло E[exp(Lambda_N) | H0] и E[exp(-Lambda_N) | H1].

    Для нормированного оценщика обе величины равны 1 (тождество
    необязательной остановки для мартингала).
    """
    mean_exp_lambda_h0: float
    se_h0: float
    mean_exp_neg_lambda_h1: float
    se_h1: float
    trials: int
    used_h0: int
    used_h1: int
    truncated_h0: int
    truncated_h1: int

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

def cost_brackets(targets: ErrorTargets) -> Tuple[float, float]:
    """
    Скобки стоимости SPRT, зависящие только от целевых ошибок:

    bracket0 = pf log(pf/(1-pm)) + (1-pf) log((1-pf)/pm)
    bracket1 = pm log(pm/(1-pf)) + (1-pm) log((1-pm)/pf)

    Знаменатель последнего логарифма bracket0 равен pm, что согласовано с
    a = log(pm/(1-pf)) и тождеством Вальда E[Lambda_N|H0] = E[N|H0] E[z|H0].
    """
    pf, pm = targets.pf, targets.pm
    bracket0 = pf * np.log(pf / (1.0 - pm)) + (1.0 - pf) * np.log((1.0 - pf) / pm)
    bracket1 = pm * np.log(pm / (1.0 - pf)) + (1.0 - pm) * np.log((1.0 - pm) / pf)
    return float(bracket0), float(bracket1)

def thresholds_from_errors(targets: ErrorTargets) -> Thresholds:
    """a = log(pm/(1-pf)), b = log((1-pm)/pf)."""
    return Thresholds(a=float(np.log(targets.pm / (1.0 - targets.pf))),
                      b=float(np.log((1.0 - targets.pm) / targets.pf)))

def errors_from_thresholds(t: Thresholds) -> ErrorTargets:
    """
    Ошибки при нулевом перескоке:
    P_F = (1 - e^a)/(e^b - e^a), P_M = e^a (e^b - 1)/(e^b - e^a).
    """
    A = np.exp(t.a)
    B = np.exp(t.b)
    pf = (1.0 - A) / (B - A)
    pm = A * (B - 1.0) / (B - A)
    if not (0.0 < pf < 1.0 and 0.0 < pm < 1.0 and pf + pm < 1.0):
        raise ConfigError(f"Пороги a={t.a}, b={t.b} дают недопустимые ошибки ({pf}, {pm})")
    # ErrorTargets требует значений < 0.5; для произвольных порогов создаём без проверки
    targets = object.__new__(ErrorTargets)
    object.__setattr__(targets, "pf", float(pf))
    object.__setattr__(targets, "pm", float(pm))
    return targets

def theoretical_cost(targets: ErrorTargets, d01: float, d10: float,
                     pi0: float = 0.5, pi1: Optional[float] = None) -> TheoreticalCost:
    """
    Стоимость стандартного SPRT: n0 = bracket0/d01, n1 = bracket1/d10,
    total = pi0 n0 + pi1 n1 = omega0/d01 + omega1/d10.

    Raises:
        ConfigError: неположительная дивергенция
    """
    if pi1 is None:
        pi1 = 1.0 - pi0
    if not (d01 > 0 and d10 > 0):
        raise ConfigError(f"Дивергенции должны быть положительными: d01={d01}, d10={d10}")
    bracket0, bracket1 = cost_brackets(targets)
    n0 = bracket0 / d01
    n1 = bracket1 / d10
    return TheoreticalCost(n0=float(n0), n1=float(n1), total=float(pi0 * n0 + pi1 * n1))

class IteratorSource:
    """
    Адаптер произвольного итерируемого источника к контракту peek/advance.

    Элементы, прочитанные через peek, буферизуются и не считаются
    потреблёнными до вызова advance.
    """

    def __init__(self, iterable: Iterable):
        self._iterator = iter(iterable)
        self._buffer: List[np.ndarray] = []
        self.consumed = 0

    def peek(self, k: int) -> np.ndarray:
        while len(self._buffer) < k:
            try:
                self._buffer.append(np.asarray(next(self._iterator), dtype=float))
            except StopIteration:
                break
        return np.array(self._buffer[:k])

    def advance(self, k: int) -> None:
        del self._buffer[:k]
        self.consumed += k

def as_source(stream: Any) -> Any:
    """Возвращает stream, если он поддерживает peek/advance, иначе оборачивает его."""
    if hasattr(stream, "peek") and hasattr(stream, "advance"):
        return stream
    return IteratorSource(stream)

def _decide(stat: float, t: Thresholds) -> Optional[Decision]:
    if stat <= t.a:
        return Decision.H0
    if stat >= t.b:
        return Decision.H1
    return None

def _truncated_outcome(stat: float, n: int) -> SprtOutcome:
    # Решение при усечении по знаку статистики, ноль -> H0
    decision = Decision.H1 if stat > 0.0 else Decision.H0
    return SprtOutcome(decision=decision, n_samples=n, final_stat=float(stat), truncated=True)

def run_sprt(scorer: Any, stream: Any, t: Thresholds, n_max: int) -> SprtOutcome:
    """
    Выполняет SPRT над потоком выборок.

    Накапливает Lambda_n = sum score(x_i) и останавливается при
    Lambda_n <= a (решение H0) или Lambda_n >= b (решение H1). Поток
    читается блоками через peek, но потребляется ровно n_samples элементов.
    При достижении n_max без пересечения решение по знаку статистики
    (H1 при Lambda > 0, иначе H0) с признаком truncated.

    Args:
        scorer: Оценщик с методом score_batch
        stream: Источник с peek/advance или любой итерируемый объект
        t: Пороги
        n_max: Максимальное число выборок (>= 1)

    Returns:
        SprtOutcome

    Raises:
        SprtAbortError: оценщик вернул нечисловое значение или поток иссяк
    """
    if n_max < 1:
        raise ConfigError(f"n_max должно быть >= 1, получено {n_max}")

    source = as_source(stream)
    stat = 0.0
    n = 0
    block = FIRST_BLOCK
    while n < n_max:
        k = min(block, n_max - n)
        X = source.peek(k)
        if len(X) == 0:
            raise SprtAbortError(f"Поток выборок иссяк после {n} элементов")
        k = len(X)
        scores = np.asarray(scorer.score_batch(X), dtype=float)
        path = np.cumsum(np.concatenate([[stat], scores]))[1:]

        bad = ~np.isfinite(path)
        crossed = (path <= t.a) | (path >= t.b)
        stop = int(np.argmax(crossed | bad)) if np.any(crossed | bad) else -1
        if stop >= 0:
            if bad[stop]:
                raise SprtAbortError(
                    f"Оценщик вернул нечисловое значение на выборке {n + stop + 1}",
                    "Оценщик вернул нечисловое значение, прогон SPRT прерван"
                )
            source.advance(stop + 1)
            final = float(path[stop])
            return SprtOutcome(decision=_decide(final, t), n_samples=n + stop + 1,
                               final_stat=final, truncated=False)

        source.advance(k)
        n += k
        stat = float(path[-1])
        block = min(2 * block, MAX_BLOCK)

    return _truncated_outcome(stat, n)

def record_scores_sprt(scores: Sequence[float], t: Thresholds, n_max: Optional[int] = None) -> SprtOutcome:
    """SPRT над заранее записанной последовательностью оценок."""
    scores = np.asarray(scores, dtype=float)
    limit = len(scores) if n_max is None else min(n_max, len(scores))
    if limit < 1:
        raise ConfigError("Нужна хотя бы одна оценка")
    path = np.cumsum(scores[:limit])
    crossed = (path <= t.a) | (path >= t.b)
    if np.any(crossed):
        stop = int(np.argmax(crossed))
        final = float(path[stop])
        return SprtOutcome(decision=_decide(final, t), n_samples=stop + 1, final_stat=final, truncated=False)
    return _truncated_outcome(float(path[-1]), limit)

def run_trials(scorer: Any, source: Any, class_label: int, t: Thresholds, trials: int,
               n_max: int, seed: int, key_prefix: Tuple[int, ...] = (),
               threads: int = 1) -> List[SprtOutcome]:
    """
    Независимые прогоны SPRT под одной гипотезой.

    Прогон i читает поток с генератором make_rng(seed, *key_prefix,
    class_label, i), поэтому любой оценщик видит те же выборки
    (общие случайные числа), а результат не зависит от числа потоков.

    Args:
        scorer: Оценщик
        source: Фабрика потоков с методом open(rng)
        class_label: Истинная гипотеза (0 или 1)
        t: Пороги
        trials: Число прогонов
        n_max: Усечение
        seed: Корневой seed
        key_prefix: Дополнительные счётчики (например, номер точки сетки)
        threads: Число потоков

    Returns:
        Список исходов в порядке номеров прогонов
    """
    if trials < 1:
        raise ConfigError(f"Число прогонов должно быть >= 1, получено {trials}")

    def one(trial: int) -> SprtOutcome:
        stream = source.open(make_rng(seed, *key_prefix, class_label, trial))
        return run_sprt(scorer, stream, t, n_max)

    if threads <= 1:
        return [one(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(trials)))

def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    if len(values) == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else float("inf")
    return mean, se

def wald_identity_check(scorer: Any, spec_h0: Any, spec_h1: Any, t: Thresholds, trials: int,
                        n_max: int, seed: int, threads: int = 1) -> WaldIdentityReport:
    """
    Проверка тождества необязательной остановки методом Монте-Карло.

    Оценивает E[exp(Lambda_N) | H0] и E[exp(-Lambda_N) | H1] по неусечённым
    прогонам; для нормированного оценщика обе величины равны 1.
    Распределение оценки тяжелохвостое, поэтому стандартная ошибка
    считается по выборке.

    Raises:
        SprtAbortError: все прогоны под одной из гипотез усечены
    """
    results = {}
    for label, spec, sign in ((0, spec_h0, 1.0), (1, spec_h1, -1.0)):
        outcomes = run_trials(scorer, MixtureSource(spec), label, t, trials, n_max, seed, threads=threads)
        stats = np.array([o.final_stat for o in outcomes if not o.truncated])
        truncated = sum(1 for o in outcomes if o.truncated)
        if len(stats) == 0:
            raise SprtAbortError(
                f"Все {trials} прогонов под H{label} усечены на n_max={n_max}",
                "Все прогоны усечены: проверка тождества Вальда невозможна"
            )
        with np.errstate(over="ignore"):
            mean, se = _mean_se(np.exp(sign * stats))
        results[label] = (mean, se, len(stats), truncated)

    report = WaldIdentityReport(
        mean_exp_lambda_h0=results[0][0], se_h0=results[0][1],
        mean_exp_neg_lambda_h1=results[1][0], se_h1=results[1][1],
        trials=trials, used_h0=results[0][2], used_h1=results[1][2],
        truncated_h0=results[0][3], truncated_h1=results[1][3],
    )
    sprt_logger.info(
        f"Тождество Вальда: E[e^L|H0]={report.mean_exp_lambda_h0:.4f}±{report.se_h0:.4f}, "
        f"E[e^-L|H1]={report.mean_exp_neg_lambda_h1:.4f}±{report.se_h1:.4f}"
    )
    return report
