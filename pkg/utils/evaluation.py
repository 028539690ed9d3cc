"""
Оценка детекторов методом Монте-Карло.

Эмпирические ошибки и моменты остановки SPRT, кривые
"ошибка - средняя стоимость" по сетке порогов, оценка дивергенций и
сравнение нескольких оценщиков на общих случайных числах: прогон i
каждой точки сетки читает один и тот же поток выборок для любого
оценщика.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from config import TRUNCATION_FLAG_FRACTION
from utils.data import GaussianMixtureSpec, MixtureSource
from utils.exceptions import ConfigError
from utils.logger import get_module_logger, get_run_logger
from utils.seeding import derive_seed, make_rng
from utils.sprt import (
    ErrorTargets, SprtOutcome, Thresholds, errors_from_thresholds, run_trials, thresholds_from_errors,
)

# Настраиваем логгер для модуля оценки
eval_logger = get_module_logger('evaluation')

CURVE_COLUMNS = ["scorer", "pf_target", "pm_target", "a", "b", "pf_emp", "pm_emp",
                 "err_emp", "mean_n", "se_n", "trunc_frac"]
OUTCOME_COLUMNS = ["trial", "true_class", "decision", "n_samples", "final_stat", "truncated"]
DIVERGENCE_BATCH = 65536

@dataclass(frozen=True)
class TrialRecord:
    """Итог одного прогона с номером и истинной гипотезой."""
    trial: int
    true_class: int
    decision: int
    n_samples: int
    final_stat: float
    truncated: bool

@dataclass
class EvalSummary:
    """
    Сводка Монте-Карло для одной пары порогов.

    Ошибки со стандартными ошибками биномиальной доли, моменты остановки
    по классам со стандартными ошибками среднего, доли усечённых прогонов.
    Усечённые прогоны учитываются с их вынужденным решением.
    """
    thresholds: Thresholds
    trials0: int
    trials1: int
    pf: float
    pf_se: float
    pm: float
    pm_se: float
    mean_n0: float
    se_n0: float
    median_n0: float
    mean_n1: float
    se_n1: float
    median_n1: float
    trunc0: float
    trunc1: float
    prior0: float = 0.5
    records: List[TrialRecord] = field(default_factory=list, repr=False)

    @property
    def prior1(self) -> float:
        return 1.0 - self.prior0

    @property
    def error_rate(self) -> float:
        """pi0 P_F + pi1 P_M."""
        return self.prior0 * self.pf + self.prior1 * self.pm

    @property
    def mean_n(self) -> float:
        """pi0 E[N|H0] + pi1 E[N|H1]."""
        return self.prior0 * self.mean_n0 + self.prior1 * self.mean_n1

    @property
    def se_n(self) -> float:
        return float(np.hypot(self.prior0 * self.se_n0, self.prior1 * self.se_n1))

    @property
    def trunc_frac(self) -> float:
        return (self.trunc0 * self.trials0 + self.trunc1 * self.trials1) / (self.trials0 + self.trials1)

    @property
    def flagged(self) -> bool:
        return self.trunc_frac > TRUNCATION_FLAG_FRACTION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.thresholds.a, "b": self.thresholds.b,
            "trials0": self.trials0, "trials1": self.trials1,
            "pf": self.pf, "pf_se": self.pf_se, "pm": self.pm, "pm_se": self.pm_se,
            "mean_n0": self.mean_n0, "se_n0": self.se_n0, "median_n0": self.median_n0,
            "mean_n1": self.mean_n1, "se_n1": self.se_n1, "median_n1": self.median_n1,
            "trunc0": self.trunc0, "trunc1": self.trunc1, "prior0": self.prior0,
            "error_rate": self.error_rate, "mean_n": self.mean_n, "se_n": self.se_n,
            "truncation_flag": self.flagged,
        }

    def outcomes_frame(self) -> pd.DataFrame:
        """Таблица исходов всех прогонов (формат CSV исходов)."""
        return pd.DataFrame([
            {"trial": r.trial, "true_class": r.true_class, "decision": r.decision,
             "n_samples": r.n_samples, "final_stat": r.final_stat, "truncated": int(r.truncated)}
            for r in self.records
        ], columns=OUTCOME_COLUMNS)

def _binomial(successes: int, total: int) -> tuple:
    p = successes / total
    return p, float(np.sqrt(p * (1.0 - p) / total))

def _stopping(values: np.ndarray) -> tuple:
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return mean, se, float(np.median(values))

def summarize(records: Sequence[TrialRecord], thresholds: Thresholds, prior0: float = 0.5) -> EvalSummary:
    """
    Сводка по записанным исходам: биномиальные ошибки и средние моменты остановки.

    Raises:
        ConfigError: нет прогонов под одной из гипотез
    """
    records = list(records)
    class0 = [r for r in records if r.true_class == 0]
    class1 = [r for r in records if r.true_class == 1]
    if not class0 or not class1:
        raise ConfigError("Для сводки нужны прогоны под обеими гипотезами")

    pf, pf_se = _binomial(sum(r.decision == 1 for r in class0), len(class0))
    pm, pm_se = _binomial(sum(r.decision == 0 for r in class1), len(class1))
    mean0, se0, median0 = _stopping(np.array([r.n_samples for r in class0], dtype=float))
    mean1, se1, median1 = _stopping(np.array([r.n_samples for r in class1], dtype=float))
    return EvalSummary(
        thresholds=thresholds, trials0=len(class0), trials1=len(class1),
        pf=pf, pf_se=pf_se, pm=pm, pm_se=pm_se,
        mean_n0=mean0, se_n0=se0, median_n0=median0,
        mean_n1=mean1, se_n1=se1, median_n1=median1,
        trunc0=sum(r.truncated for r in class0) / len(class0),
        trunc1=sum(r.truncated for r in class1) / len(class1),
        prior0=prior0, records=records,
    )

SourceLike = Union[GaussianMixtureSpec, Any]

def as_stream_source(source: SourceLike) -> Any:
    """Смесь превращается в MixtureSource; фабрики потоков возвращаются как есть."""
    if isinstance(source, GaussianMixtureSpec):
        return MixtureSource(source)
    if not hasattr(source, "open"):
        raise ConfigError(f"Источник потока {type(source).__name__} не поддерживает open(rng)")
    return source

def _to_records(outcomes: Sequence[SprtOutcome], true_class: int) -> List[TrialRecord]:
    return [TrialRecord(trial=i, true_class=true_class, decision=int(o.decision), n_samples=o.n_samples,
                        final_stat=o.final_stat, truncated=o.truncated)
            for i, o in enumerate(outcomes)]

def monte_carlo(scorer: Any, source0: SourceLike, source1: SourceLike, t: Thresholds, trials: int,
                n_max: int, seed: int, threads: int = 1, prior0: float = 0.5) -> EvalSummary:
    """
    trials независимых прогонов SPRT под каждой гипотезой.

    Прогон i под гипотезой k читает поток с генератором make_rng(seed, k, i),
    поэтому результат детерминирован и не зависит от числа потоков.

    Args:
        scorer: Оценщик
        source0, source1: Смеси или фабрики потоков классов 0 и 1
        t: Пороги
        trials: Число прогонов на гипотезу (>= 1)
        n_max: Усечение
        seed: Seed
        threads: Число потоков
        prior0: Априорная вероятность H0 для усреднённых величин

    Returns:
        EvalSummary
    """
    if trials < 1:
        raise ConfigError(f"Число прогонов должно быть >= 1, получено {trials}")
    records: List[TrialRecord] = []
    for label, source in ((0, source0), (1, source1)):
        outcomes = run_trials(scorer, as_stream_source(source), label, t, trials, n_max, seed, threads=threads)
        records.extend(_to_records(outcomes, label))

    summary = summarize(records, t, prior0)
    eval_logger.info(
        f"{getattr(scorer, 'name', 'scorer')}: a={t.a:.4f}, b={t.b:.4f}, P_F={summary.pf:.4f}, "
        f"P_M={summary.pm:.4f}, E[N]={summary.mean_n:.3f}±{summary.se_n:.3f}, усечено {summary.trunc_frac:.4f}"
    )
    if summary.flagged:
        eval_logger.warning(f"Доля усечённых прогонов {summary.trunc_frac:.4f} выше {TRUNCATION_FLAG_FRACTION}")
    return summary

@dataclass
class CurvePoint:
    """Рабочая точка кривой: целевые ошибки, пороги и сводка."""
    targets: ErrorTargets
    summary: EvalSummary

    @property
    def thresholds(self) -> Thresholds:
        return self.summary.thresholds

@dataclass
class PerformanceCurve:
    """
    Кривая "эмпирическая ошибка - средняя стоимость" одного оценщика.

    Точки упорядочены по ширине порогов b - a по возрастанию.
    Ошибка и стоимость усреднены с априорными весами:
    err = pi0 P_F + pi1 P_M, mean_n = pi0 E[N|H0] + pi1 E[N|H1].
    """
    descriptor: Dict[str, Any]
    points: List[CurvePoint]

    @property
    def name(self) -> str:
        return str(self.descriptor.get("name", "scorer"))

    @property
    def flagged(self) -> bool:
        return any(p.summary.flagged for p in self.points)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.points:
            s = p.summary
            rows.append({
                "scorer": self.name, "pf_target": p.targets.pf, "pm_target": p.targets.pm,
                "a": s.thresholds.a, "b": s.thresholds.b, "pf_emp": s.pf, "pm_emp": s.pm,
                "err_emp": s.error_rate, "mean_n": s.mean_n, "se_n": s.se_n, "trunc_frac": s.trunc_frac,
            })
        return pd.DataFrame(rows, columns=CURVE_COLUMNS)

GridItem = Union[ErrorTargets, Thresholds]

def make_target_grid(targets: Sequence[float] = (), pf_grid: Sequence[float] = (),
                     pm_grid: Sequence[float] = ()) -> List[ErrorTargets]:
    """
    Сетка целевых ошибок: симметричная (pf = pm = targets) или
    асимметричная (пары pf_grid[i], pm_grid[i]).
    """
    if pf_grid or pm_grid:
        if len(pf_grid) != len(pm_grid):
            raise ConfigError(f"Длины pf_grid ({len(pf_grid)}) и pm_grid ({len(pm_grid)}) различны")
        return [ErrorTargets(float(pf), float(pm)) for pf, pm in zip(pf_grid, pm_grid)]
    if not targets:
        raise ConfigError("Сетка целевых ошибок пуста")
    return [ErrorTargets(float(v), float(v)) for v in targets]

def _grid_point(item: GridItem) -> tuple:
    if isinstance(item, Thresholds):
        return errors_from_thresholds(item), item
    return item, thresholds_from_errors(item)

def sweep(scorer: Any, source0: SourceLike, source1: SourceLike, grid: Sequence[GridItem], trials: int,
          n_max: int, seed: int, threads: int = 1, prior0: float = 0.5) -> PerformanceCurve:
    """
    Кривая по сетке целевых ошибок или порогов.

    Точка сетки i оценивается monte_carlo с seed = derive_seed(seed, i),
    поэтому сетка из одной точки совпадает с monte_carlo при этом seed,
    а разные оценщики с одним seed видят одинаковые выборки.

    Raises:
        ConfigError: пустая сетка
    """
    if not grid:
        raise ConfigError("Сетка порогов пуста")
    run_logger = get_run_logger(getattr(scorer, "name", "scorer"), seed, "sweep")
    points = []
    for i, item in enumerate(grid):
        targets, thresholds = _grid_point(item)
        run_logger.info(f"Точка {i + 1}/{len(grid)}: P_F={targets.pf:.4g}, P_M={targets.pm:.4g}")
        summary = monte_carlo(scorer, source0, source1, thresholds, trials, n_max,
                              derive_seed(seed, i), threads=threads, prior0=prior0)
        points.append(CurvePoint(targets=targets, summary=summary))

    points.sort(key=lambda p: p.thresholds.b - p.thresholds.a)
    curve = PerformanceCurve(descriptor=dict(scorer.descriptor), points=points)
    if curve.flagged:
        run_logger.warning("Кривая помечена: в некоторых точках усечено больше 1% прогонов")
    return curve

@dataclass(frozen=True)
class DivergenceEstimate:
    """D01 = -E[score | H0] и D10 = E[score | H1] со стандартными ошибками."""
    d01: float
    se01: float
    d10: float
    se10: float
    n_mc: int

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

def _mean_score(scorer: Any, source: Any, n_mc: int, rng: np.random.Generator) -> tuple:
    """Среднее и его стандартная ошибка; блоки объединяются по центральным моментам."""
    stream = source.open(rng)
    count, mean, m2 = 0, 0.0, 0.0
    remaining = n_mc
    while remaining > 0:
        k = min(DIVERGENCE_BATCH, remaining)
        s = np.asarray(scorer.score_batch(stream.take(k)), dtype=float)
        batch_mean = float(np.mean(s))
        batch_m2 = float(np.sum((s - batch_mean) ** 2))
        delta = batch_mean - mean
        total = count + k
        mean += delta * k / total
        m2 += batch_m2 + delta ** 2 * count * k / total
        count = total
        remaining -= k
    if n_mc < 2:
        return mean, 0.0
    return mean, float(np.sqrt(m2 / (n_mc - 1) / n_mc))

def estimate_divergences(scorer: Any, source0: SourceLike, source1: SourceLike, n_mc: int,
                         seed: int) -> DivergenceEstimate:
    """
    Монте-Карло оценки D01 = -mean score под p0 и D10 = mean score под p1.

    Args:
        scorer: Оценщик
        source0, source1: Смеси или фабрики потоков
        n_mc: Число выборок на класс
        seed: Seed

    Returns:
        DivergenceEstimate
    """
    if n_mc < 1:
        raise ConfigError(f"n_mc должно быть >= 1, получено {n_mc}")
    m0, se0 = _mean_score(scorer, as_stream_source(source0), n_mc, make_rng(seed, 0))
    m1, se1 = _mean_score(scorer, as_stream_source(source1), n_mc, make_rng(seed, 1))
    estimate = DivergenceEstimate(d01=-m0, se01=se0, d10=m1, se10=se1, n_mc=n_mc)
    eval_logger.info(
        f"Дивергенции {getattr(scorer, 'name', 'scorer')}: D01={estimate.d01:.5f}±{se0:.5f}, "
        f"D10={estimate.d10:.5f}±{se1:.5f} ({n_mc} выборок)"
    )
    return estimate

def _unique_names(scorers: Sequence[Any]) -> List[str]:
    names: List[str] = []
    for scorer in scorers:
        base = getattr(scorer, "name", "scorer")
        name, k = base, 2
        while name in names:
            name = f"{base}_{k}"
            k += 1
        names.append(name)
    return names

def compare(scorers: Sequence[Any], source0: SourceLike, source1: SourceLike, grid: Sequence[GridItem],
            trials: int, n_max: int, seed: int, threads: int = 1,
            prior0: float = 0.5) -> Dict[str, PerformanceCurve]:
    """
    Кривые нескольких оценщиков на общих случайных числах.

    Каждый оценщик проходит sweep с одним и тем же seed, поэтому прогон i
    точки j у всех оценщиков читает одинаковую последовательность выборок,
    а добавление оценщика не меняет кривые остальных.

    Returns:
        Словарь имя -> кривая в порядке оценщиков; совпадающие имена
        получают суффиксы _2, _3, ...
    """
    if not scorers:
        raise ConfigError("Для сравнения нужен хотя бы один оценщик")
    curves: Dict[str, PerformanceCurve] = {}
    for name, scorer in zip(_unique_names(scorers), scorers):
        curve = sweep(scorer, source0, source1, grid, trials, n_max, seed, threads=threads, prior0=prior0)
        curve.descriptor["name"] = name
        curves[name] = curve
    return curves

def combined_frame(curves: Dict[str, PerformanceCurve]) -> pd.DataFrame:
    """Все кривые сравнения одной таблицей."""
    return pd.concat([curve.to_frame() for curve in curves.values()], ignore_index=True)
