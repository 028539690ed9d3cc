import logging
import os
from typing import Dict, Any, Optional

class ContextAdapter(logging.LoggerAdapter):
    """
    Адаптер для добавления контекстной информации в логи.

    Расширяет стандартный логгер, добавляя информацию о контексте
    выполнения (метод обучения, корневой seed, операция).

    Пример использования:
        run_logger = ContextAdapter(logger, {'method': 'wkdrf', 'seed': 7})
        run_logger.info("Начинаем обучение")
        # Результат: [Method: wkdrf | Seed: 7] Начинаем обучение
    """
    def __init__(self, logger: logging.Logger, extra: Optional[Dict[str, Any]] = None):
        """
        Инициализирует адаптер логгера с дополнительной информацией.

        Args:
            logger: Базовый логгер, к которому добавляется функциональность
            extra: Словарь с дополнительными данными для добавления в лог
        """
        super().__init__(logger, extra or {})

    def process(self, msg: str, kwargs: Dict[str, Any]) -> tuple:
        """
        Обрабатывает сообщение перед логированием, добавляя контекстную информацию.

        Args:
            msg: Исходное сообщение для логирования
            kwargs: Дополнительные параметры логирования

        Returns:
            tuple: Кортеж из модифицированного сообщения и параметров
        """
        context_parts = []

        if 'method' in self.extra:
            context_parts.append(f"Method: {self.extra['method']}")

        if 'seed' in self.extra:
            context_parts.append(f"Seed: {self.extra['seed']}")

        if 'operation' in self.extra:
            context_parts.append(f"Op: {self.extra['operation']}")

        if context_parts:
            context_str = " | ".join(context_parts)
            formatted_msg = f"[{context_str}] {msg}"
        else:
            formatted_msg = msg

        if 'extra' not in kwargs:
            kwargs['extra'] = {}
        kwargs['extra'].update(self.extra)

        return formatted_msg, kwargs

def setup_logging() -> logging.Logger:
    """
    Настройка и инициализация главного логгера приложения.

    Уровень логирования берется из переменной окружения LOG_LEVEL
    (по умолчанию: INFO). Если задана переменная LOG_FILE, дополнительно
    подключается файловый обработчик. Логгеры модулей создаются как
    дочерние ('learned_sprt.wkdrf' и т.д.) и наследуют обработчики.

    Returns:
        logging.Logger: Настроенный экземпляр логгера
    """
    log_level = os.getenv("LOG_LEVEL", "INFO").upper()

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    logger = logging.getLogger('learned_sprt')
    logger.setLevel(getattr(logging, log_level, logging.INFO))

    # Повторный вызов не должен дублировать обработчики
    if not logger.handlers:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        log_file = os.getenv("LOG_FILE")
        if log_file:
            log_dir = os.path.dirname(log_file)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    logger.propagate = False

    return logger

# Создаем и экспортируем экземпляр логгера
logger = setup_logging()

def get_module_logger(name: str) -> logging.Logger:
    """Возвращает дочерний логгер модуля, например 'learned_sprt.kernel'."""
    return logger.getChild(name)

def get_run_logger(method: Optional[str] = None, seed: Optional[int] = None,
                   operation: Optional[str] = None) -> ContextAdapter:
    """
    Создает логгер с контекстом запуска.

    Args:
        method: Метод обучения или оценщик (wkdrf, klfit, waldboost, oracle)
        seed: Корневой seed запуска
        operation: Опциональное название операции

    Returns:
        ContextAdapter: Логгер с добавленным контекстом
    """
    extra: Dict[str, Any] = {}

    if method:
        extra['method'] = method

    if seed is not None:
        extra['seed'] = seed

    if operation:
        extra['operation'] = operation

    return ContextAdapter(logger, extra)
