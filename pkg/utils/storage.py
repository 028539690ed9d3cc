"""
Запись результатов запусков: JSON, CSV и манифест воспроизведения.

Манифест не содержит отметок времени, поэтому повторный запуск с той же
конфигурацией даёт побайтно одинаковые файлы.
"""
import hashlib
import json
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from config import TOOL_VERSION
from utils.exceptions import DataFileError
from utils.logger import get_module_logger

# Настраиваем логгер для модуля хранения
storage_logger = get_module_logger('storage')

def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value

def write_json(path: str, payload: Dict[str, Any]) -> str:
    """
    Записывает JSON с отступами и возвращает путь.

    Raises:
        DataFileError: ошибка записи
    """
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(_jsonable(payload), f, ensure_ascii=False, indent=2)
            f.write("\n")
    except OSError as e:
        raise DataFileError(f"Не удалось записать {path}: {e}", f"Не удалось записать файл {path}")
    storage_logger.info(f"Записан {path}")
    return path

def write_frame(path: str, frame: pd.DataFrame) -> str:
    """Записывает таблицу в CSV с полной точностью чисел."""
    try:
        _ensure_parent(path)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    except OSError as e:
        raise DataFileError(f"Не удалось записать {path}: {e}", f"Не удалось записать файл {path}")
    storage_logger.info(f"Записан {path} ({len(frame)} строк)")
    return path

def file_sha256(path: str) -> str:
    """SHA-256 содержимого файла."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()

def write_manifest(out_dir: str, command: str, config: Dict[str, Any], outputs: List[str],
                   extra: Dict[str, Any] = None) -> str:
    """
    Записывает manifest.json: команда, полная конфигурация, корневой seed,
    версия инструмента и SHA-256 каждого выходного файла.

    Манифест можно передать обратно через --config, чтобы повторить запуск.
    """
    payload = {
        "command": command,
        "tool_version": TOOL_VERSION,
        "seed": config.get("seed"),
        "config": config,
        "outputs": {os.path.relpath(p, out_dir): file_sha256(p) for p in sorted(outputs)},
    }
    if extra:
        payload.update(extra)
    return write_json(os.path.join(out_dir, "manifest.json"), payload)
