import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional
from dotenv import load_dotenv, dotenv_values
from utils.exceptions import ConfigError
from utils.logger import logger

def get_env_var(name: str, required: bool = True, default: Optional[str] = None) -> Optional[str]:
    """Получение переменной окружения с обработкой ошибок"""
    value = os.getenv(name, default)
    if required and not value:
        raise ConfigError(
            f"Отсутствует обязательная переменная окружения: {name}",
            f"Ошибка конфигурации. Проверьте наличие переменной {name}"
        )
    return value

try:
    # Файл .env необязателен: библиотека работает и без него
    load_dotenv()

    # Параметры барьерного решателя
    DEFAULT_GRAD_TOL = float(get_env_var("LSPRT_GRAD_TOL", required=False, default="1e-6"))
    DEFAULT_REL_TOL = float(get_env_var("LSPRT_REL_TOL", required=False, default="1e-9"))
    DEFAULT_MAX_STAGES = int(get_env_var("LSPRT_MAX_STAGES", required=False, default="9"))
    DEFAULT_BARRIER_FACTOR = float(get_env_var("LSPRT_BARRIER_FACTOR", required=False, default="10"))
    DEFAULT_MAX_INNER = int(get_env_var("LSPRT_MAX_INNER", required=False, default="500"))

    # Линейный поиск Армихо
    ARMIJO_INITIAL_STEP = 1.0
    ARMIJO_SHRINK = 0.5
    ARMIJO_SLOPE = 1e-4
    ARMIJO_MAX_HALVINGS = 60

    # Метрика спуска: относительная добавка к диагонали и период пересчёта
    METRIC_RIDGE = 1e-6
    METRIC_REFRESH = 20

    # Параметры оценки методом Монте-Карло
    DEFAULT_N_MAX = int(get_env_var("LSPRT_N_MAX", required=False, default="10000"))
    DEFAULT_THREADS = int(get_env_var("LSPRT_THREADS", required=False, default="1"))
    DEFAULT_TARGET_GRID = [0.01, 0.02, 0.05, 0.1, 0.15, 0.2]
    TRUNCATION_FLAG_FRACTION = 0.01

    # Размер внутреннего блока генерации потоков выборок
    STREAM_CHUNK = 256

    TOOL_VERSION = "1.0.0"

    logger.debug("Конфигурация успешно загружена")

except Exception as e:
    logger.critical(f"Ошибка при инициализации конфигурации: {e}", exc_info=True)
    raise

def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"не булево значение: {value!r}")

def _parse_float_list(value: str) -> List[float]:
    return [float(item) for item in value.replace(";", ",").split(",") if item.strip()]

def _parse_int_list(value: str) -> List[int]:
    return [int(item) for item in value.replace(";", ",").split(",") if item.strip()]

def _parse_str_list(value: str) -> List[str]:
    return [item.strip() for item in value.replace(";", ",").split(",") if item.strip()]

_PARSERS = {
    "str": str,
    "int": int,
    "float": float,
    "bool": _parse_bool,
    "floats": _parse_float_list,
    "ints": _parse_int_list,
    "strs": _parse_str_list,
}

def _opt(kind: str, default: Any = None, key: Optional[str] = None, help: str = "",
         runtime: bool = False) -> Any:
    """
    Описание ключа конфигурации: тип, значение по умолчанию, имя ключа.

    Ключи с runtime=True (потоки, каталог вывода) не влияют на результаты
    и не попадают в манифест.
    """
    metadata = {"kind": kind, "key": key, "help": help, "runtime": runtime}
    factory_default = list(default) if isinstance(default, list) else None
    if factory_default is not None:
        return field(default_factory=lambda: list(factory_default), metadata=metadata)
    return field(default=default, metadata=metadata)

@dataclass
class RunConfig:
    """
    Плоская конфигурация запуска CLI.

    Каждый ключ файла конфигурации (формат KEY=value) соответствует ровно
    одному флагу командной строки --key-name. Значения флагов
    переопределяют значения из файла.
    """
    seed: Optional[int] = _opt("int", help="корневой seed запуска (обязателен)")
    out_dir: str = _opt("str", "results", help="директория для результатов", runtime=True)
    threads: int = _opt("int", DEFAULT_THREADS, help="число потоков для независимых прогонов", runtime=True)

    # Источники данных
    spec_file: Optional[str] = _opt("str", help="JSON со спецификацией гауссовых смесей")
    n_per_class: int = _opt("int", 2000, help="число выборок на класс для synth")
    dataset: Optional[str] = _opt("str", help="CSV обучающего набора class,f1,...,fd")
    standardize: bool = _opt("bool", False, help="аффинная стандартизация признаков")
    har_features: Optional[str] = _opt("str", help="файл X_*.txt набора UCI HAR")
    har_labels: Optional[str] = _opt("str", help="файл y_*.txt набора UCI HAR")
    har_task: str = _opt("str", "moving", help="moving | updown | custom")
    har_positive: List[int] = _opt("ints", [], help="метки класса 1 для har_task=custom")
    har_negative: List[int] = _opt("ints", [], help="метки класса 0 для har_task=custom")
    feature_set: str = _opt("str", "mean-acc", help="mean-acc | mean-freq-acc | custom")
    feature_indices: List[int] = _opt("ints", [], help="номера столбцов с 1 для feature_set=custom")

    # Обучение
    method: str = _opt("str", "wkdrf", help="wkdrf | klfit | waldboost")
    sigma: Optional[float] = _opt("float", help="ширина гауссова ядра")
    lam: Optional[float] = _opt("float", key="lambda", help="коэффициент регуляризации")
    num_centers: int = _opt("int", 25, help="число центров ядра")
    centers_file: Optional[str] = _opt("str", help="JSON с центрами для общей геометрии")
    sigma_grid: List[float] = _opt("floats", [], help="сетка sigma для кросс-валидации")
    lambda_grid: List[float] = _opt("floats", [], help="сетка lambda для кросс-валидации")
    holdout_fraction: float = _opt("float", 0.3, help="доля отложенной выборки при кросс-валидации")
    target_pf: float = _opt("float", 0.1, help="целевая вероятность ложной тревоги")
    target_pm: float = _opt("float", 0.1, help="целевая вероятность пропуска")
    prior0: float = _opt("float", 0.5, help="априорная вероятность H0")
    grad_tol: float = _opt("float", DEFAULT_GRAD_TOL, help="допуск по норме градиента")
    rel_tol: float = _opt("float", DEFAULT_REL_TOL, help="относительный допуск остановки по убыванию цели")
    max_stages: int = _opt("int", DEFAULT_MAX_STAGES, help="число внешних барьерных этапов")
    barrier_factor: float = _opt("float", DEFAULT_BARRIER_FACTOR, help="множитель уменьшения mu")
    max_inner: int = _opt("int", DEFAULT_MAX_INNER, help="максимум внутренних итераций")
    rounds: int = _opt("int", 200, help="число пней в WaldBoost")
    fail_on_nonconvergence: bool = _opt("bool", False, help="ненулевой код при несходимости")

    # Оценка
    model: Optional[str] = _opt("str", help="JSON модели для eval/sweep/diagnose")
    models: List[str] = _opt("strs", [], help="список JSON моделей для compare")
    oracle: bool = _opt("bool", False, help="добавить точный оракул (нужен spec_file)")
    stream_source: str = _opt("str", "spec", help="spec | dataset")
    eval_dataset: Optional[str] = _opt("str", help="CSV для потоков с возвращением")
    targets: List[float] = _opt("floats", DEFAULT_TARGET_GRID, help="симметричная сетка целевых ошибок")
    pf_grid: List[float] = _opt("floats", [], help="асимметричная сетка P_F")
    pm_grid: List[float] = _opt("floats", [], help="асимметричная сетка P_M")
    trials: int = _opt("int", 5000, help="число прогонов на гипотезу")
    n_max: int = _opt("int", DEFAULT_N_MAX, help="усечение SPRT")

    @classmethod
    def keys(cls) -> Dict[str, str]:
        """Соответствие ключ конфигурации -> имя поля."""
        return {(f.metadata.get("key") or f.name): f.name for f in fields(cls)}

    @classmethod
    def from_mapping(cls, values: Dict[str, Any]) -> "RunConfig":
        """
        Строит конфигурацию из словаря строк (файл или флаги).

        Raises:
            ConfigError: неизвестный ключ или значение неверного типа
        """
        key_map = cls.keys()
        field_map = {f.name: f for f in fields(cls)}
        parsed: Dict[str, Any] = {}
        for raw_key, raw_value in values.items():
            key = raw_key.strip().lower().replace("-", "_")
            if key not in key_map:
                raise ConfigError(f"Неизвестный ключ конфигурации: {raw_key}",
                                  f"Неизвестный ключ конфигурации '{raw_key}'")
            name = key_map[key]
            if raw_value is None:
                continue
            if not isinstance(raw_value, str):
                parsed[name] = raw_value
                continue
            kind = field_map[name].metadata["kind"]
            try:
                parsed[name] = _PARSERS[kind](raw_value)
            except ValueError as e:
                raise ConfigError(f"Неверное значение ключа {key}={raw_value!r}: {e}",
                                  f"Неверное значение для '{key}': {raw_value}")
        return cls(**parsed)

    def to_mapping(self) -> Dict[str, Any]:
        """Словарь ключ -> значение для манифеста (JSON-совместимый), без ключей времени выполнения."""
        return {(f.metadata.get("key") or f.name): getattr(self, f.name)
                for f in fields(self) if not f.metadata.get("runtime")}

    def require(self, *names: str) -> None:
        """Проверяет, что перечисленные поля заданы."""
        key_of = {f.name: (f.metadata.get("key") or f.name) for f in fields(self)}
        for name in names:
            value = getattr(self, name)
            if value is None or value == []:
                raise ConfigError(f"Не задан обязательный ключ {key_of[name]}",
                                  f"Укажите '{key_of[name]}' в конфигурации или флагом --{key_of[name].replace('_', '-')}")

    def require_file(self, *names: str) -> None:
        """Проверяет, что перечисленные пути заданы и существуют."""
        self.require(*names)
        for name in names:
            path = getattr(self, name)
            if not os.path.exists(path):
                raise ConfigError(f"Файл не найден: {path}", f"Файл не найден: {path}")

def read_config_file(path: str) -> Dict[str, Any]:
    """
    Читает файл конфигурации KEY=value или манифест предыдущего запуска.

    Args:
        path: Путь к .env-подобному файлу или к manifest.json

    Returns:
        Словарь ключ -> значение

    Raises:
        ConfigError: файл отсутствует или повреждён
    """
    if not os.path.exists(path):
        raise ConfigError(f"Файл конфигурации не найден: {path}",
                          f"Файл конфигурации не найден: {path}")

    if path.endswith(".json"):
        try:
            with open(path, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Повреждённый манифест {path}: {e}")
        if "config" not in manifest:
            raise ConfigError(f"В манифесте {path} нет раздела config")
        return dict(manifest["config"])

    return dict(dotenv_values(path))

def load_run_config(path: Optional[str], overrides: Dict[str, Any]) -> RunConfig:
    """
    Загружает конфигурацию запуска: файл, затем переопределения флагами.

    Args:
        path: Путь к файлу конфигурации или None
        overrides: Значения флагов командной строки (None = не задан)

    Returns:
        RunConfig с обязательным seed
    """
    values: Dict[str, Any] = read_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})

    config = RunConfig.from_mapping(values)
    if config.seed is None:
        raise ConfigError("Не задан seed запуска",
                          "Укажите seed в конфигурации или флагом --seed")
    if config.threads < 1:
        raise ConfigError(f"threads должен быть >= 1, получено {config.threads}")

    logger.info(f"Конфигурация запуска загружена (seed={config.seed}, файл={path})")
    return config
