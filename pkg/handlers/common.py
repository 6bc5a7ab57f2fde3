import json
import logging
import os
import time
import traceback
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np
import pandas as pd

from config import (DEFAULT_WORKERS, ENABLE_RESULTS_CACHE, GAUSSIAN_CLUSTERS, GAUSSIAN_SPAN, OUTPUT_DIR)
from services.analysis_boundary import SweepSettings
from services.exceptions import (BasinExhaustedError, ConfigError, ContractViolation, InvalidParameterError,
                                 NonStationaryError, SimulationError)
from services.integrate import DEFAULT_SZ0_GRID, IntegratorConfig, OutcomeKind
from services.model import (ClusterEnsemble, CumulantOrder, PhysicalParams, coupling_for_cooperativity,
                            gaussian_ensemble, homogeneous_ensemble, mhz_to_angular)
from utils.charts import line_chart
from utils.formatters import write_csv, write_sidecar
from utils.validators import validate_run_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_UNPHYSICAL = 4

DEFAULT_SPINS = 100
DEFAULT_COOPERATIVITY = 14.0


@dataclass
class RunContext:
    """Разобранная конфигурация прогона"""
    raw: Dict[str, Any]
    params: PhysicalParams
    order: CumulantOrder
    integrator: IntegratorConfig
    sweep: Dict[str, Any]
    output_dir: str
    workers: int = 1
    svg: bool = False
    use_cache: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)
    started: float = field(default_factory=time.monotonic)

    @property
    def ensemble_section(self) -> Dict[str, Any]:
        return self.raw.get('ensemble', {})

    def settings(self) -> SweepSettings:
        return SweepSettings(integrator=self.integrator,
                             sz0_grid=tuple(self.sweep.get('sz0_grid', DEFAULT_SZ0_GRID)),
                             seed=self.sweep.get('seed', 'unexcited'), use_cache=self.use_cache)


def load_run_config(path: Optional[str]) -> Dict[str, Any]:
    """
    Загрузка и проверка JSON-конфигурации

    Args:
        path: Путь к файлу или None (все значения по умолчанию)

    Returns:
        Dict[str, Any]: Проверенная конфигурация
    """
    if path is None:
        return {}
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Файл конфигурации не найден: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Ошибка разбора JSON в {path}: {e}")

    valid, error = validate_run_config(data)
    if not valid:
        raise ConfigError(error)
    return data


def apply_overrides(data: Dict[str, Any], out: Optional[str] = None, workers: Optional[int] = None,
                    order: Optional[str] = None) -> Dict[str, Any]:
    """Флаги командной строки имеют приоритет над файлом"""
    resolved = json.loads(json.dumps(data))
    if out is not None:
        resolved['output_dir'] = out
    if workers is not None:
        if workers < 1:
            raise ConfigError(f"--workers должно быть положительным: {workers}")
        resolved['workers'] = workers
    if order is not None:
        resolved['order'] = order
    valid, error = validate_run_config(resolved)
    if not valid:
        raise ConfigError(error)
    return resolved


def build_params(section: Dict[str, Any]) -> PhysicalParams:
    return PhysicalParams.from_mhz(**section)


def build_ensemble(section: Dict[str, Any], params: PhysicalParams, n: Optional[float] = None,
                   gamma_mhz: Optional[float] = None, cooperativity: Optional[float] = None) -> ClusterEnsemble:
    """
    Ансамбль из раздела ensemble

    Кооперативность задаёт общую константу связи по неуширенной формуле,
    поэтому у гауссова ансамбля эффективное C меньше заданного.
    """
    n = float(n if n is not None else section.get('n', DEFAULT_SPINS))
    if cooperativity is None and 'g_mhz' in section:
        g = mhz_to_angular(section['g_mhz'])
    else:
        c = cooperativity if cooperativity is not None else section.get('cooperativity', DEFAULT_COOPERATIVITY)
        g = coupling_for_cooperativity(c, n, params)

    if section.get('kind', 'homogeneous') == 'gaussian':
        gamma = gamma_mhz if gamma_mhz is not None else section.get('gamma_mhz', 0.5)
        return gaussian_ensemble(n, mhz_to_angular(gamma), section.get('clusters', GAUSSIAN_CLUSTERS),
                                 section.get('span', GAUSSIAN_SPAN), g)
    return homogeneous_ensemble(n, g)


def build_context(data: Dict[str, Any], svg: bool = False) -> RunContext:
    try:
        params = build_params(data.get('params', {}))
        integrator = IntegratorConfig(**data.get('integrator', {}))
    except (TypeError, InvalidParameterError) as e:
        raise ConfigError(str(e))
    return RunContext(raw=data, params=params, order=CumulantOrder.parse(data.get('order', 'ce3')),
                      integrator=integrator, sweep=data.get('sweep', {}),
                      output_dir=data.get('output_dir', OUTPUT_DIR),
                      workers=data.get('workers', DEFAULT_WORKERS), svg=svg,
                      use_cache=data.get('use_cache', ENABLE_RESULTS_CACHE))


def write_result(ctx: RunContext, name: str, frame: pd.DataFrame, chart: Optional[Dict[str, Any]] = None,
                 extra: Optional[Dict[str, Any]] = None) -> str:
    """CSV, JSON-сопровождение и (с --svg) график"""
    path = write_csv(frame, os.path.join(ctx.output_dir, f"{name}.csv"))
    write_sidecar(path, ctx.raw, time.monotonic() - ctx.started, extra)
    if ctx.svg and chart is not None:
        line_chart(frame, path=os.path.join(ctx.output_dir, f"{name}.svg"), **chart)
    return path


def exit_code_for(statuses: Iterable[str]) -> int:
    """Код возврата по статусам обязательных точек; нефизичный исход важнее таймаута"""
    statuses = [str(s) for s in statuses]
    if any(OutcomeKind.UNPHYSICAL.value in s for s in statuses):
        return EXIT_UNPHYSICAL
    if any(OutcomeKind.TIMEOUT.value in s or OutcomeKind.LIMIT_CYCLE.value in s or s.startswith('error')
           for s in statuses):
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _exit_code_for_error(error: SimulationError) -> int:
    if isinstance(error, (ConfigError, InvalidParameterError, ContractViolation)):
        return EXIT_CONFIG
    if isinstance(error, NonStationaryError):
        kind = getattr(error.outcome, 'kind', None)
        return EXIT_UNPHYSICAL if kind is OutcomeKind.UNPHYSICAL else EXIT_NO_CONVERGENCE
    if isinstance(error, BasinExhaustedError):
        return exit_code_for(outcome.kind.value for _, outcome in error.attempts)
    # NoConvergenceError, StiffnessError и прочие ошибки счёта
    return EXIT_NO_CONVERGENCE


def run_handler(handler: Callable[[RunContext], int], ctx: RunContext) -> int:
    """Вызов обработчика с переводом исключений в коды возврата"""
    try:
        logger.info(f"Запуск {handler.__name__}, результаты в {ctx.output_dir}")
        code = handler(ctx)
        logger.info(f"{handler.__name__} завершён за {time.monotonic() - ctx.started:.1f} с, код {code}")
        return code
    except SimulationError as e:
        logger.error(f"{type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())
        return _exit_code_for_error(e)


def ratio_grid(sweep: Dict[str, Any], default_max: float = 1.5, default_points: int = 31) -> np.ndarray:
    """Сетка η/η_crit: явный список или равномерная сетка до eta_max_ratio"""
    if 'eta_ratios' in sweep:
        return np.asarray(sweep['eta_ratios'], dtype=float)
    points = sweep.get('eta_points', default_points)
    top = sweep.get('eta_max_ratio', default_max)
    return np.linspace(top / points, top, points)
