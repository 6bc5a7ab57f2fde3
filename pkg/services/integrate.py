"""Интегрирование уравнений моментов и классификация исходов.

find_stationary ведёт решатель scipy пошагово и после каждого шага
проверяет физичность, стационарность на скользящем окне и, на границах
окон, периодичность |⟨a⟩|².
"""
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import DOP853, RK45, solve_ivp
from scipy.optimize import root

from services.cumulant_eom import MomentEquations, check_physical, initial_state, observables
from services.exceptions import (BasinExhaustedError, ContractViolation, InvalidInitialStateError,
                                 InvalidParameterError, StiffnessError)

logger = logging.getLogger(__name__)

_SOLVERS = {'DOP853': DOP853, 'RK45': RK45}

DEFAULT_SZ0_GRID = tuple(np.linspace(-1.0, -0.5, 6))


class OutcomeKind(str, Enum):
    STATIONARY = 'stationary'
    LIMIT_CYCLE = 'limit_cycle'
    UNPHYSICAL = 'unphysical'
    TIMEOUT = 'timeout'


@dataclass
class Outcome:
    kind: OutcomeKind
    final_time: float
    amplitude: float = float('nan')
    oscillation: float = 0.0
    offending: Optional[str] = None
    message: str = ''

    @property
    def is_stationary(self) -> bool:
        return self.kind is OutcomeKind.STATIONARY

    def describe(self) -> str:
        text = f"{self.kind.value} at t={self.final_time:.4g}"
        if self.offending:
            text += f" ({self.offending})"
        if self.kind is OutcomeKind.LIMIT_CYCLE:
            text += f", p2p={self.oscillation:.3g}"
        return text


@dataclass(frozen=True)
class IntegratorConfig:
    """Настройки интегратора (время в мкс).

    max_time=None: 10³/κ · max(1, 1/(1 - η/η+_crit)); max_step=None: 1/(10κ).
    """
    rtol: float = 1e-8
    atol: float = 1e-10
    max_time: Optional[float] = None
    ss_rel_tol: float = 1e-8
    window: float = 5.0
    phys_tol: float = 1e-6
    method: str = 'DOP853'
    max_step: Optional[float] = None
    cycle_tol: float = 0.02
    polish: bool = True
    polish_max_size: int = 2000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise InvalidParameterError(f"rtol и atol должны быть положительными: {self.rtol}, {self.atol}")
        if self.ss_rel_tol <= 0 or self.window <= 0 or self.phys_tol < 0:
            raise InvalidParameterError("ss_rel_tol и window должны быть положительными, phys_tol неотрицательным")
        if self.max_time is not None and self.max_time <= 0:
            raise InvalidParameterError(f"max_time должно быть положительным: {self.max_time}")
        if self.method not in _SOLVERS:
            raise InvalidParameterError(f"Неизвестный метод {self.method}; допустимы {', '.join(_SOLVERS)}")

    def as_dict(self) -> dict:
        return asdict(self)


def default_max_time(kappa: float, eta_ratio: Optional[float] = None) -> float:
    factor = 1.0
    if eta_ratio is not None and eta_ratio < 1.0:
        factor = max(1.0, 1.0 / (1.0 - eta_ratio))
    return 1e3 / kappa * factor


def _max_step(system: MomentEquations, config: IntegratorConfig) -> float:
    return config.max_step if config.max_step is not None else 1.0 / (10.0 * system.params.kappa)


def _max_time(system: MomentEquations, config: IntegratorConfig) -> float:
    return config.max_time if config.max_time is not None else default_max_time(system.params.kappa)


@dataclass
class Trajectory:
    frame: pd.DataFrame
    outcome: Optional[Outcome] = None


def _trajectory_row(system: MomentEquations, t: float, y: np.ndarray) -> dict:
    obs = observables(system.layout, y)
    row = {'t': t, 're_a': obs['a'].real, 'im_a': obs['a'].imag, 'abs_a_sq': obs['abs_a_sq'],
           'n_phot': obs['n_phot']}
    for mu, value in enumerate(obs['sz']):
        row[f'sz_{mu}'] = value
    return row


def evolve(system: MomentEquations, state0: np.ndarray, config: IntegratorConfig,
           sample_times: Sequence[float]) -> Trajectory:
    """Траектория наблюдаемых в моменты sample_times"""
    system.layout.check(state0)
    times = np.asarray(sample_times, dtype=float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) < 0) or times[0] < 0:
        raise ContractViolation("sample_times должны быть неотрицательными и возрастающими")
    solution = solve_ivp(system, (0.0, float(times[-1])), state0, method=config.method, t_eval=times,
                         rtol=config.rtol, atol=config.atol, max_step=_max_step(system, config))

    rows, outcome = [], None
    for t, y in zip(solution.t, solution.y.T):
        problem = check_physical(system.layout, y, config.phys_tol)
        if problem:
            outcome = Outcome(OutcomeKind.UNPHYSICAL, float(t), offending=problem,
                              message="Нарушение физических границ")
            logger.warning(f"Unphysical state at t={t:.4g}: {problem}")
            break
        rows.append(_trajectory_row(system, float(t), y))

    if solution.status < 0 and outcome is None:
        last = solution.y[:, -1] if solution.y.size else state0
        problem = check_physical(system.layout, last, config.phys_tol)
        if problem:
            outcome = Outcome(OutcomeKind.UNPHYSICAL, float(solution.t[-1]) if solution.t.size else 0.0,
                              offending=problem, message=solution.message)
        else:
            raise StiffnessError(f"Интегрирование остановлено: {solution.message}",
                                 time=float(solution.t[-1]) if solution.t.size else 0.0)
    columns = ['t', 're_a', 'im_a', 'abs_a_sq', 'n_phot'] + [f'sz_{mu}' for mu in range(system.layout.l)]
    return Trajectory(frame=pd.DataFrame.from_records(rows, columns=columns), outcome=outcome)


def _oscillation(values: List[float], ss_rel_tol: float) -> Optional[float]:
    """Размах |⟨a⟩|² на окне, если окно содержит незатухающие колебания"""
    if len(values) < 5:
        return None
    x = np.asarray(values)
    mean = float(np.mean(x))
    swing = float(np.max(x) - np.min(x))
    if swing <= 10.0 * ss_rel_tol * max(mean, np.finfo(float).tiny):
        return None
    maxima = np.sum((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))
    return swing if maxima >= 2 else None


def _polish(system: MomentEquations, y: np.ndarray, config: IntegratorConfig) -> np.ndarray:
    """Уточнение стационарной точки методом Ньютона"""
    if not config.polish or y.size > config.polish_max_size:
        return y

    def residual(v):
        return system(0.0, v)

    before = np.linalg.norm(residual(y))
    solution = root(residual, y, method='hybr', options={'xtol': 1e-14})
    if not solution.success:
        logger.debug(f"Polish failed: {solution.message}")
        return y
    after = np.linalg.norm(residual(solution.x))
    shift = np.linalg.norm(solution.x - y)
    if after < before and shift <= 1e-6 * max(np.linalg.norm(y), 1.0) \
            and check_physical(system.layout, solution.x, config.phys_tol) is None:
        return solution.x
    logger.warning(f"Polish rejected: residual {before:.2e} -> {after:.2e}, shift {shift:.2e}")
    return y


def find_stationary(system: MomentEquations, state0: np.ndarray,
                    config: IntegratorConfig) -> Tuple[np.ndarray, Outcome]:
    """Интегрирование до стационара, предельного цикла, нарушения физичности или max_time"""
    layout = system.layout
    layout.check(state0)
    max_time = _max_time(system, config)
    solver = _SOLVERS[config.method](system, 0.0, np.array(state0, dtype=float), max_time,
                                     max_step=_max_step(system, config), rtol=config.rtol, atol=config.atol)
    quiet_since = None
    window_end = config.window
    window_values: List[float] = []
    previous_swing = None
    y = solver.y

    while solver.status == 'running':
        message = solver.step()
        t, y = solver.t, solver.y
        if solver.status == 'failed':
            problem = check_physical(layout, y, config.phys_tol)
            if problem:
                return y.copy(), Outcome(OutcomeKind.UNPHYSICAL, t, offending=problem, message=str(message))
            raise StiffnessError(f"Шаг интегрирования стал слишком мал: {message}", time=t, step=solver.step_size)

        problem = check_physical(layout, y, config.phys_tol)
        if problem:
            logger.debug(f"Unphysical at t={t:.4g}: {problem}")
            return y.copy(), Outcome(OutcomeKind.UNPHYSICAL, t, amplitude=observables(layout, y)['abs_a_sq'],
                                     offending=problem, message="Нарушение физических границ")

        if np.linalg.norm(system(t, y)) <= config.ss_rel_tol * np.linalg.norm(y):
            quiet_since = t if quiet_since is None else quiet_since
            if t - quiet_since >= config.window:
                final = _polish(system, y.copy(), config)
                amplitude = observables(layout, final)['abs_a_sq']
                logger.debug(f"Stationary at t={t:.4g}, |a|^2={amplitude:.6g}")
                return final, Outcome(OutcomeKind.STATIONARY, t, amplitude=amplitude)
        else:
            quiet_since = None

        window_values.append(observables(layout, y)['abs_a_sq'])
        if t >= window_end:
            swing = _oscillation(window_values, config.ss_rel_tol)
            if swing is not None and previous_swing is not None \
                    and abs(swing - previous_swing) <= config.cycle_tol * previous_swing:
                logger.debug(f"Limit cycle at t={t:.4g}, p2p={swing:.4g}")
                return y.copy(), Outcome(OutcomeKind.LIMIT_CYCLE, t, amplitude=observables(layout, y)['abs_a_sq'],
                                         oscillation=swing)
            previous_swing = swing
            window_values = []
            window_end += config.window

    return y.copy(), Outcome(OutcomeKind.TIMEOUT, float(solver.t), amplitude=observables(layout, y)['abs_a_sq'],
                             message=f"max_time={max_time:.4g} достигнуто")


@dataclass
class BasinResult:
    sz0: float
    state: np.ndarray
    outcome: Outcome
    attempts: List[Tuple[float, Outcome]] = field(default_factory=list)


def basin_scan(system: MomentEquations, sz0_grid: Sequence[float], config: IntegratorConfig,
               state_factory=None) -> BasinResult:
    """Первый стационарный исход при переборе начального ⟨σz⟩ в порядке сетки.

    Args:
        system: Правая часть уравнений
        sz0_grid: Значения ⟨σz⟩(0) в [-1, -0.5]
        config: Настройки интегратора
        state_factory: Необязательная замена initial_state(layout, sz0)

    Returns:
        BasinResult: Начальное значение, стационарное состояние и все попытки
    """
    grid = [float(v) for v in sz0_grid]
    if not grid:
        raise ContractViolation("Сетка начальных условий пуста")
    if any(v < -1.0 or v > -0.5 for v in grid):
        raise InvalidInitialStateError(f"Начальные ⟨σz⟩ должны лежать в [-1, -0.5]: {grid}")
    factory = state_factory if state_factory is not None else initial_state
    attempts = []
    for sz0 in grid:
        state, outcome = find_stationary(system, factory(system.layout, sz0), config)
        attempts.append((sz0, outcome))
        if outcome.is_stationary:
            return BasinResult(sz0=sz0, state=state, outcome=outcome, attempts=attempts)
        logger.info(f"sz0={sz0:+.2f}: {outcome.describe()}")
    summary = '; '.join(f"sz0={sz0:+.2f}: {outcome.describe()}" for sz0, outcome in attempts)
    raise BasinExhaustedError(f"Ни одно начальное условие не привело к стационару: {summary}", attempts=attempts)
