"""Исключения численного ядра.

Все ошибки наследуют SimulationError, обработчики CLI переводят их в коды
возврата (см. handlers/common.py).
"""
from typing import Any, List, Optional


class SimulationError(Exception):
    """Базовая ошибка моделирования"""


class ConfigError(SimulationError):
    """Некорректный файл конфигурации или аргументы командной строки"""


class InvalidParameterError(SimulationError, ValueError):
    """Физические параметры вне допустимой области"""


class InvalidGridError(InvalidParameterError):
    """Некорректная сетка (чётное число кластеров, пустая или неупорядоченная сетка)"""


class InvalidInitialStateError(InvalidParameterError):
    """Начальное ⟨σz⟩ вне допустимого диапазона"""


class ContractViolation(SimulationError, ValueError):
    """Несогласованные аргументы: длина вектора состояния, размер ансамбля и т.п."""


class DimensionMismatchError(ContractViolation):
    """Матрица плотности не соответствует размерности гильбертова пространства"""


class UndefinedNormalizationError(SimulationError, ValueError):
    """Нормировка на нулевую полуклассическую амплитуду"""


class NoConvergenceError(SimulationError):
    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class StiffnessError(SimulationError):
    def __init__(self, message: str, time: float, step: Optional[float] = None):
        super().__init__(message)
        self.time = time
        self.step = step


class BasinExhaustedError(SimulationError):
    def __init__(self, message: str, attempts: List[Any]):
        super().__init__(message)
        self.attempts = attempts


class NonStationaryError(SimulationError):
    """Один из порядков разложения не пришёл к стационару.

    outcome содержит исход последней попытки; если интегрирование прервалось
    с ошибкой, outcome равен None, а reason хранит имя исключения.
    """

    def __init__(self, message: str, order: str, outcome: Any, reason: Optional[str] = None):
        super().__init__(message)
        self.order = order
        self.outcome = outcome
        self.reason = reason


class BoundaryNotFoundError(SimulationError):
    def __init__(self, message: str, trace: List[dict]):
        super().__init__(message)
        self.trace = trace


class TruncationError(SimulationError):
    """Заселённость верхнего фоковского уровня превышает допуск"""

    def __init__(self, message: str, population: float):
        super().__init__(message)
        self.population = population
