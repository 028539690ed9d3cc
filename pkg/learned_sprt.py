#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Обучаемые SPRT-детекторы: генерация данных, обучение, оценка

Описание: Командная строка для воспроизводимых запусков. Каждый ключ
файла конфигурации KEY=value имеет флаг --key-name; флаги переопределяют
файл. Каждый запуск пишет manifest.json, который можно передать обратно
через --config.
"""

import argparse
import os
import sys
from dataclasses import fields, replace
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from config import RunConfig, load_run_config
from utils.data import (
    LabeledDataset, MixtureSource, ResampleSource, Standardizer, gen_mixture_samples,
    load_dataset_csv, load_mixture_specs, save_dataset_csv,
)
from utils.evaluation import combined_frame, compare, estimate_divergences, make_target_grid, monte_carlo, sweep
from utils.exceptions import ConfigError, ConvergenceError, DimensionMismatchError, handle_error
from utils.har import load_har, make_task
from utils.kernel import load_centers, pick_centers, save_centers, save_model
from utils.klfit import KlFitConfig, cross_validate_kl, fit_kl
from utils.logger import get_run_logger
from utils.scorer import OracleScorer, Scorer, load_scorer, normalization_diagnostics, oracle_scorer
from utils.seeding import derive_seed
from utils.sprt import ErrorTargets, theoretical_cost, thresholds_from_errors, wald_identity_check
from utils.storage import write_frame, write_json, write_manifest
from utils.waldboost import exponential_loss, save_ensemble, train_adaboost
from utils.wkdrf import WkdrfConfig, cross_validate, fit

def cmd_synth(cfg: RunConfig) -> int:
    """Генерирует синтетический набор из спецификации смесей."""
    cfg.require_file("spec_file")
    run_logger = get_run_logger("synth", cfg.seed, "synth")
    spec0, spec1 = load_mixture_specs(cfg.spec_file)

    dataset = LabeledDataset(
        gen_mixture_samples(spec0, cfg.n_per_class, derive_seed(cfg.seed, 0)),
        gen_mixture_samples(spec1, cfg.n_per_class, derive_seed(cfg.seed, 1)),
    )
    path = os.path.join(cfg.out_dir, "dataset.csv")
    save_dataset_csv(dataset, path)
    write_manifest(cfg.out_dir, "synth", cfg.to_mapping(), [path],
                   {"spec": {"class0": spec0.to_dict(), "class1": spec1.to_dict()}})
    run_logger.info(f"Сгенерировано {dataset.m}+{dataset.n} выборок в {path}")
    return 0

def cmd_har_prepare(cfg: RunConfig) -> int:
    """Извлекает бинарную задачу из файлов UCI HAR в CSV."""
    cfg.require_file("har_features", "har_labels")
    run_logger = get_run_logger("har", cfg.seed, "har-prepare")
    task = make_task(cfg.har_task, cfg.feature_set, cfg.har_positive, cfg.har_negative, cfg.feature_indices)
    dataset, report = load_har(cfg.har_features, cfg.har_labels, task)

    outputs = []
    if cfg.standardize:
        standardizer = Standardizer.fit(dataset)
        dataset = standardizer.apply(dataset)
        outputs.append(write_json(os.path.join(cfg.out_dir, "standardizer.json"), standardizer.to_dict()))

    path = os.path.join(cfg.out_dir, "dataset.csv")
    save_dataset_csv(dataset, path)
    outputs.append(path)
    outputs.append(write_json(os.path.join(cfg.out_dir, "ingestion.json"), report.to_dict()))
    write_manifest(cfg.out_dir, "har-prepare", cfg.to_mapping(), outputs)
    run_logger.info(f"Задача {cfg.har_task}: класс 0 = {dataset.m}, класс 1 = {dataset.n}")
    return 0

def _training_centers(cfg: RunConfig, data: LabeledDataset) -> np.ndarray:
    if cfg.centers_file:
        cfg.require_file("centers_file")
        centers = load_centers(cfg.centers_file)
        if centers.shape[1] != data.dim:
            raise DimensionMismatchError(
                f"Центры размерности {centers.shape[1]}, данные размерности {data.dim}",
                "Размерность файла центров не совпадает с набором данных"
            )
        return centers
    return pick_centers(data, cfg.num_centers, cfg.seed)

def _kernel_hyperparameters(cfg: RunConfig) -> bool:
    """True, если нужна кросс-валидация; иначе проверяет явные sigma и lambda."""
    if cfg.sigma_grid or cfg.lambda_grid:
        cfg.require("sigma_grid", "lambda_grid")
        return True
    cfg.require("sigma", "lam")
    return False

def _train_kernel(cfg: RunConfig, data: LabeledDataset) -> Tuple[Any, Dict[str, Any]]:
    centers = _training_centers(cfg, data)
    use_cv = _kernel_hyperparameters(cfg)
    # Без файла центров кросс-валидация выбирает центры из обучающей части разбиения
    fold_centers = centers if cfg.centers_file else None
    cv_table = None

    if cfg.method == "wkdrf":
        base = WkdrfConfig(
            target_pf=cfg.target_pf, target_pm=cfg.target_pm, prior0=cfg.prior0,
            lam=cfg.lam if cfg.lam is not None else 0.0,
            sigma=cfg.sigma if cfg.sigma is not None else 1.0,
            num_centers=len(centers), seed=cfg.seed, grad_tol=cfg.grad_tol, rel_tol=cfg.rel_tol,
            max_stages=cfg.max_stages, barrier_factor=cfg.barrier_factor, max_inner=cfg.max_inner,
        )
        if use_cv:
            result = cross_validate(data, cfg.sigma_grid, cfg.lambda_grid, cfg.holdout_fraction, cfg.seed,
                                    config=base, centers=fold_centers, threads=cfg.threads)
            base = replace(base, sigma=result.sigma, lam=result.lam)
            cv_table = result.to_dict()
        model, diagnostics = fit(data, base, centers=centers)
    else:
        base = KlFitConfig(
            sigma=cfg.sigma if cfg.sigma is not None else 1.0,
            num_centers=len(centers), lam=cfg.lam if cfg.lam is not None else 0.0,
            seed=cfg.seed, grad_tol=cfg.grad_tol, rel_tol=cfg.rel_tol,
            max_iter=cfg.max_inner * cfg.max_stages,
        )
        if use_cv:
            result = cross_validate_kl(data, cfg.sigma_grid, cfg.lambda_grid, cfg.holdout_fraction, cfg.seed,
                                       config=base, centers=fold_centers, threads=cfg.threads)
            base = replace(base, sigma=result.sigma, lam=result.lam)
            cv_table = result.to_dict()
        model, diagnostics = fit_kl(data, base, centers=centers)

    report = diagnostics.to_dict()
    if cv_table is not None:
        report["cross_validation"] = cv_table
    return model, report

def cmd_train(cfg: RunConfig) -> int:
    """Обучает выбранный метод и пишет модель и диагностику."""
    cfg.require_file("dataset")
    if cfg.method not in ("wkdrf", "klfit", "waldboost"):
        raise ConfigError(f"Неизвестный метод: {cfg.method}", "method должен быть wkdrf, klfit или waldboost")
    run_logger = get_run_logger(cfg.method, cfg.seed, "train")
    data = load_dataset_csv(cfg.dataset)

    model_path = os.path.join(cfg.out_dir, f"model_{cfg.method}.json")
    diagnostics_path = os.path.join(cfg.out_dir, f"diagnostics_{cfg.method}.json")
    outputs = [model_path, diagnostics_path]

    if cfg.method == "waldboost":
        ensemble = train_adaboost(data, cfg.rounds, cfg.seed, cfg.prior0)
        save_ensemble(ensemble, model_path)
        report = {"method": "waldboost", "rounds": len(ensemble.stumps),
                  "train_loss": exponential_loss(ensemble, data),
                  "loss_history": list(ensemble.loss_history), "converged": True}
    else:
        model, report = _train_kernel(cfg, data)
        save_model(model, model_path)
        centers_path = os.path.join(cfg.out_dir, "centers.json")
        save_centers(model.centers, centers_path)
        outputs.append(centers_path)

    write_json(diagnostics_path, report)
    write_manifest(cfg.out_dir, "train", cfg.to_mapping(), outputs)

    if not report["converged"]:
        message = f"Обучение {cfg.method} не сошлось за отведённое число итераций"
        if cfg.fail_on_nonconvergence:
            raise ConvergenceError(message, "Решатель не сошёлся; файлы записаны, см. диагностику")
        run_logger.warning(
            f"{message}; записана лучшая допустимая итерация. Причины остановки этапов: "
            f"{report.get('stage_stops')}, норма градиента {report.get('grad_norm')}"
        )
        print(f"Предупреждение: {message}. Модель может быть далека от оптимума, см. {diagnostics_path}")
    run_logger.info(f"Модель записана в {model_path}")
    return 0

def _oracle(cfg: RunConfig) -> OracleScorer:
    if not cfg.spec_file:
        raise ConfigError("Оракул требует spec_file",
                          "Оценка с оракулом требует синтетическую спецификацию (spec_file), а не файл модели")
    cfg.require_file("spec_file")
    return oracle_scorer(*load_mixture_specs(cfg.spec_file))

def _build_scorers(cfg: RunConfig, many: bool) -> List[Scorer]:
    paths = list(cfg.models) if many else []
    if cfg.model:
        paths.insert(0, cfg.model)
    scorers: List[Scorer] = []
    for path in paths:
        if not os.path.exists(path):
            raise ConfigError(f"Файл модели не найден: {path}", f"Файл модели не найден: {path}")
        scorers.append(load_scorer(path))
    if cfg.oracle:
        scorers.append(_oracle(cfg))
    if not scorers:
        raise ConfigError("Не задан оценщик", "Укажите model (или models) либо oracle=true")
    if not many and len(scorers) > 1:
        raise ConfigError("Команде нужен один оценщик: задайте либо model, либо oracle=true")
    return scorers

def _build_sources(cfg: RunConfig) -> Tuple[Any, Any]:
    if cfg.stream_source == "spec":
        cfg.require_file("spec_file")
        spec0, spec1 = load_mixture_specs(cfg.spec_file)
        return MixtureSource(spec0, "class0"), MixtureSource(spec1, "class1")
    if cfg.stream_source == "dataset":
        path = cfg.eval_dataset or cfg.dataset
        if not path:
            raise ConfigError("Для stream_source=dataset нужен eval_dataset",
                              "Укажите eval_dataset для потоков с возвращением")
        if not os.path.exists(path):
            raise ConfigError(f"Файл не найден: {path}", f"Файл не найден: {path}")
        data = load_dataset_csv(path)
        return ResampleSource(data.class0, "class0"), ResampleSource(data.class1, "class1")
    raise ConfigError(f"Неизвестный источник потоков: {cfg.stream_source}",
                      "stream_source должен быть spec или dataset")

def _check_dimensions(scorers: List[Scorer], source: Any) -> None:
    for scorer in scorers:
        if scorer.dim is not None and scorer.dim != source.dim:
            raise DimensionMismatchError(
                f"Оценщик {scorer.name} размерности {scorer.dim}, поток размерности {source.dim}",
                f"Размерность модели {scorer.name} ({scorer.dim}) не совпадает с данными ({source.dim})"
            )

def _prepare_evaluation(cfg: RunConfig, many: bool) -> Tuple[List[Scorer], Any, Any]:
    scorers = _build_scorers(cfg, many)
    source0, source1 = _build_sources(cfg)
    _check_dimensions(scorers, source0)
    return scorers, source0, source1

def cmd_eval(cfg: RunConfig) -> int:
    """Монте-Карло оценка одного оценщика при целевых ошибках (target_pf, target_pm)."""
    (scorer,), source0, source1 = _prepare_evaluation(cfg, many=False)
    t = thresholds_from_errors(ErrorTargets(cfg.target_pf, cfg.target_pm))
    summary = monte_carlo(scorer, source0, source1, t, cfg.trials, cfg.n_max, cfg.seed,
                          threads=cfg.threads, prior0=cfg.prior0)

    payload = {"scorer": scorer.descriptor, "target_pf": cfg.target_pf, "target_pm": cfg.target_pm,
               "stream_source": cfg.stream_source, "summary": summary.to_dict()}
    outputs = [
        write_json(os.path.join(cfg.out_dir, "summary.json"), payload),
        write_frame(os.path.join(cfg.out_dir, "outcomes.csv"), summary.outcomes_frame()),
    ]
    write_manifest(cfg.out_dir, "eval", cfg.to_mapping(), outputs)
    return 0

def _curve_outputs(cfg: RunConfig, name: str, curve: Any) -> List[str]:
    return [
        write_frame(os.path.join(cfg.out_dir, f"curve_{name}.csv"), curve.to_frame()),
        write_json(os.path.join(cfg.out_dir, f"curve_{name}.json"), {
            "scorer": curve.descriptor,
            "stream_source": cfg.stream_source,
            "flagged": curve.flagged,
            "points": [{"pf_target": p.targets.pf, "pm_target": p.targets.pm, **p.summary.to_dict()}
                       for p in curve.points],
        }),
    ]

def cmd_sweep(cfg: RunConfig) -> int:
    """Кривая одного оценщика по сетке целевых ошибок."""
    (scorer,), source0, source1 = _prepare_evaluation(cfg, many=False)
    grid = make_target_grid(cfg.targets, cfg.pf_grid, cfg.pm_grid)
    curve = sweep(scorer, source0, source1, grid, cfg.trials, cfg.n_max, cfg.seed,
                  threads=cfg.threads, prior0=cfg.prior0)
    outputs = _curve_outputs(cfg, curve.name, curve)
    write_manifest(cfg.out_dir, "sweep", cfg.to_mapping(), outputs)
    return 0

def cmd_compare(cfg: RunConfig) -> int:
    """Кривые нескольких оценщиков на общих случайных числах."""
    scorers, source0, source1 = _prepare_evaluation(cfg, many=True)
    grid = make_target_grid(cfg.targets, cfg.pf_grid, cfg.pm_grid)
    curves = compare(scorers, source0, source1, grid, cfg.trials, cfg.n_max, cfg.seed,
                     threads=cfg.threads, prior0=cfg.prior0)

    outputs: List[str] = []
    for name, curve in curves.items():
        outputs.extend(_curve_outputs(cfg, name, curve))
    outputs.append(write_frame(os.path.join(cfg.out_dir, "compare.csv"), combined_frame(curves)))
    write_manifest(cfg.out_dir, "compare", cfg.to_mapping(), outputs)
    return 0

def cmd_diagnose(cfg: RunConfig) -> int:
    """Проверка нормировки, тождества Вальда и дивергенций оценщика на синтетических смесях."""
    (scorer,) = _build_scorers(cfg, many=False)
    cfg.require_file("spec_file")
    spec0, spec1 = load_mixture_specs(cfg.spec_file)
    _check_dimensions([scorer], spec0)
    run_logger = get_run_logger(scorer.name, cfg.seed, "diagnose")

    if cfg.dataset:
        cfg.require_file("dataset")
        data = load_dataset_csv(cfg.dataset)
    else:
        data = LabeledDataset(
            gen_mixture_samples(spec0, cfg.n_per_class, derive_seed(cfg.seed, 0)),
            gen_mixture_samples(spec1, cfg.n_per_class, derive_seed(cfg.seed, 1)),
        )
    normalization = normalization_diagnostics(scorer, data)

    targets = ErrorTargets(cfg.target_pf, cfg.target_pm)
    t = thresholds_from_errors(targets)
    wald = wald_identity_check(scorer, spec0, spec1, t, cfg.trials, cfg.n_max,
                               derive_seed(cfg.seed, 2), threads=cfg.threads)
    divergences = estimate_divergences(scorer, spec0, spec1, cfg.n_per_class, derive_seed(cfg.seed, 3))

    payload = {"scorer": scorer.descriptor, "normalization": normalization.to_dict(),
               "wald_identity": wald.to_dict(), "divergences": divergences.to_dict()}
    if divergences.d01 > 0 and divergences.d10 > 0:
        cost = theoretical_cost(targets, divergences.d01, divergences.d10, cfg.prior0)
        payload["theoretical_cost"] = {"n0": cost.n0, "n1": cost.n1, "total": cost.total}
    else:
        run_logger.warning("Оценка дивергенции неположительна, теоретическая стоимость не вычисляется")

    outputs = [write_json(os.path.join(cfg.out_dir, "diagnose.json"), payload)]
    write_manifest(cfg.out_dir, "diagnose", cfg.to_mapping(), outputs)
    return 0

COMMANDS: Dict[str, Tuple[Callable[[RunConfig], int], str]] = {
    "synth": (cmd_synth, "сгенерировать синтетический набор из спецификации смесей"),
    "har-prepare": (cmd_har_prepare, "извлечь бинарную задачу из файлов UCI HAR"),
    "train": (cmd_train, "обучить wkdrf, klfit или waldboost"),
    "eval": (cmd_eval, "оценить один оценщик при заданных целевых ошибках"),
    "sweep": (cmd_sweep, "построить кривую ошибка-стоимость по сетке"),
    "compare": (cmd_compare, "сравнить несколько оценщиков на общих случайных числах"),
    "diagnose": (cmd_diagnose, "проверить нормировку и тождество Вальда на синтетике"),
}

def build_parser() -> argparse.ArgumentParser:
    """Парсер с подкомандами; флаги повторяют ключи RunConfig один к одному."""
    parser = argparse.ArgumentParser(
        description="Обучаемые SPRT-детекторы",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Примеры:
  python learned_sprt.py synth --config configs/synthetic.env
  python learned_sprt.py train --config configs/synthetic.env --method waldboost
  python learned_sprt.py compare --config results/compare/manifest.json
Коды завершения: 0 успех, 1 непредвиденная ошибка, 2 конфигурация,
3 файлы данных, 4 недопустимая задача, 5 несходимость,
6 несовпадение размерностей, 7 прерванный SPRT.
        """
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", "-c", default=None, help="файл KEY=value или manifest.json")
        for f in fields(RunConfig):
            key = f.metadata.get("key") or f.name
            sub.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, help=f.metadata["help"])
    return parser

def main(argv: List[str] = None) -> int:
    """
    Главная функция для запуска CLI

    Returns:
        int: Код завершения процесса
    """
    args = build_parser().parse_args(argv)
    context = {"command": args.command, "config": args.config}
    try:
        values = vars(args)
        overrides = {key: values.get(key) for key in RunConfig.keys()}
        cfg = load_run_config(args.config, overrides)
        handler, _ = COMMANDS[args.command]
        return handler(cfg)
    except Exception as e:
        return handle_error(e, context)

if __name__ == "__main__":
    sys.exit(main())
