from typing import Optional
from utils.logger import logger

class DetectorError(Exception):
    """
    Базовый класс для всех исключений библиотеки обучаемых SPRT-детекторов.

    Расширяет стандартный Exception полем с коротким сообщением, которое
    можно безопасно показать пользователю CLI, и кодом завершения процесса.
    Все специфичные исключения должны наследоваться от этого класса.

    Attributes:
        message (str): Техническое сообщение об ошибке для логирования
        user_message (str): Сообщение, которое выводится пользователю
        exit_code (int): Код завершения процесса для CLI
    """
    exit_code = 1

    def __init__(self, message: str, user_message: Optional[str] = None):
        """
        Инициализирует исключение с техническим и пользовательским сообщением.

        Args:
            message (str): Техническое сообщение об ошибке для логирования
            user_message (Optional[str]): Сообщение для пользователя,
                                          по умолчанию совпадает с техническим
        """
        self.message = message
        self.user_message = user_message or message
        super().__init__(self.message)

class ConfigError(DetectorError):
    """
    Ошибка конфигурации запуска: неизвестный ключ, неверное значение,
    отсутствующий обязательный параметр или файл.
    """
    exit_code = 2

class DataFileError(DetectorError):
    """
    Ошибка чтения или записи файлов данных: несовпадение числа строк,
    нечисловой токен, индекс признака вне диапазона, пустой набор.
    """
    exit_code = 3

class InfeasibleError(DetectorError):
    """
    Не удалось найти строго допустимую точку для выпуклой программы
    (например, классы неразличимы по средним признакам).
    """
    exit_code = 4

class ConvergenceError(DetectorError):
    """
    Решатель исчерпал бюджет итераций без выполнения критериев остановки.
    """
    exit_code = 5

class DimensionMismatchError(DetectorError):
    """
    Размерности модели, выборки или потока не совпадают.
    """
    exit_code = 6

class SprtAbortError(DetectorError):
    """
    Прогон SPRT прерван: оценщик вернул нечисловое значение или все
    прогоны оказались усечены.
    """
    exit_code = 7

class DomainViolationError(DetectorError):
    """
    Точка alpha вне открытой области, где оба знаменателя положительны.
    Решатель трактует это как отклонённый шаг.
    """
    exit_code = 4

def handle_error(error: Exception, context: Optional[dict] = None) -> int:
    """
    Централизованная обработка ошибок с логированием.

    Args:
        error (Exception): Объект исключения, которое требуется обработать
        context (Optional[dict]): Дополнительная контекстная информация
                                  (команда, путь к конфигурации)

    Returns:
        int: Код завершения процесса
    """
    error_id = id(error)

    if isinstance(error, DetectorError):
        logger.error(f"Error ID {error_id}: {error.message}", extra={"context": context})
        print(f"Ошибка: {error.user_message}")
        return error.exit_code

    logger.critical(
        f"Error ID {error_id}: Необработанная ошибка: {str(error)}",
        exc_info=True,
        extra={"context": context}
    )
    print("Произошла непредвиденная ошибка. Подробности в логе.")
    return 1
