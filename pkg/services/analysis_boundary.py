"""Нормированные амплитуды, отклонения между порядками и граница N_sc.

Граница N_sc ищется при фиксированной кооперативности: ансамбль
масштабируется через scale_ensemble, накачка задаётся в долях
критической (η+_crit по умолчанию, η−_crit для зеркальной постановки
с затравкой на верхней ветви).
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from services.cumulant_eom import MomentEquations, build_layout, factorized_state
from services.exceptions import (BasinExhaustedError, BoundaryNotFoundError, ContractViolation, InvalidGridError,
                                 InvalidParameterError, NoConvergenceError, NonStationaryError, SimulationError,
                                 StiffnessError, UndefinedNormalizationError)
from services.integrate import DEFAULT_SZ0_GRID, IntegratorConfig, Outcome, OutcomeKind, basin_scan, \
    default_max_time, find_stationary
from services.model import (ClusterEnsemble, CumulantOrder, PhysicalParams, cooperativity,
                            saturation_photon_number, scale_ensemble)
from services.semiclassical import (CriticalDrives, critical_drives, ensemble_critical_drives,
                                    inhom_steady_state, inhom_steady_states, mean_field_moments)
from services import run_cache
from utils.parallel import run_parallel

logger = logging.getLogger(__name__)

SEED_UNEXCITED = 'unexcited'
SEED_UPPER = 'upper'
REFERENCE_PLUS = 'plus'
REFERENCE_MINUS = 'minus'


def normalized_amplitude(x_ce: float, x_sc: float) -> float:
    if x_sc == 0:
        raise UndefinedNormalizationError("Полуклассическая амплитуда равна нулю")
    return x_ce / x_sc


def relative_deviation(x_n: float, x_m: float) -> float:
    """|x_n - x_m| / x_m, в знаменателе результат старшего порядка"""
    if x_m == 0:
        return 0.0 if x_n == 0 else float('inf')
    return abs(x_n - x_m) / x_m


@dataclass(frozen=True)
class DeviationTriple:
    d12: float
    d23: float
    d13: float
    x1: float = float('nan')
    x2: float = float('nan')
    x3: float = float('nan')

    @classmethod
    def from_amplitudes(cls, x1: float, x2: float, x3: float) -> 'DeviationTriple':
        return cls(d12=relative_deviation(x1, x2), d23=relative_deviation(x2, x3),
                   d13=relative_deviation(x1, x3), x1=x1, x2=x2, x3=x3)

    def below(self, delta_eps: float) -> bool:
        return self.d12 < delta_eps and self.d23 < delta_eps and self.d13 < delta_eps

    def largest(self) -> float:
        return max(self.d12, self.d23, self.d13)


@dataclass(frozen=True)
class SweepSettings:
    """Общие настройки стационарных расчётов в сканах"""
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sz0_grid: Tuple[float, ...] = DEFAULT_SZ0_GRID
    seed: str = SEED_UNEXCITED
    use_cache: bool = False

    def __post_init__(self):
        if self.seed not in (SEED_UNEXCITED, SEED_UPPER):
            raise InvalidParameterError(f"Неизвестная затравка: {self.seed}")


@dataclass
class StationaryResult:
    order: CumulantOrder
    abs_a_sq: float
    outcome: Outcome
    sz0: Optional[float]


def _with_horizon(settings: SweepSettings, params: PhysicalParams, eta_ratio: Optional[float]) -> IntegratorConfig:
    if settings.integrator.max_time is not None or eta_ratio is None:
        return settings.integrator
    return replace(settings.integrator, max_time=default_max_time(params.kappa, eta_ratio))


def _upper_state(layout, ensemble: ClusterEnsemble, params: PhysicalParams) -> np.ndarray:
    roots = [r for r in inhom_steady_states(ensemble, params, params.eta) if r.stable]
    top = roots[-1]
    a, sm, sz = mean_field_moments(ensemble, params, params.eta, top.x)
    return factorized_state(layout, a, sm, sz)


def stationary_amplitude(order, params: PhysicalParams, ensemble: ClusterEnsemble,
                         settings: Optional[SweepSettings] = None,
                         eta_ratio: Optional[float] = None) -> StationaryResult:
    """Стационарное |⟨a⟩|² одного порядка разложения.

    Args:
        order: Порядок разложения
        params: Параметры с заданной накачкой
        ensemble: Ансамбль кластеров
        settings: Затравка, сетка ⟨σz⟩(0), интегратор, кэш
        eta_ratio: η/η_crit для адаптивного горизонта интегрирования

    Returns:
        StationaryResult: Амплитуда, исход и использованное ⟨σz⟩(0) (None для верхней затравки)
    """
    settings = settings or SweepSettings()
    order = CumulantOrder.parse(order)
    integrator = _with_horizon(settings, params, eta_ratio)

    key = None
    if run_cache.cache_enabled(settings.use_cache):
        key = run_cache.stationary_key(order, params, ensemble, settings.seed, settings.sz0_grid, integrator)
        hit = run_cache.lookup_stationary(key)
        if hit is not None:
            outcome = Outcome(OutcomeKind(hit['outcome']), hit['final_time'], amplitude=hit['abs_a_sq'])
            return StationaryResult(order, hit['abs_a_sq'], outcome, hit['sz0'])

    layout = build_layout(order, ensemble.size)
    system = MomentEquations(layout, params, ensemble)
    result = None
    if settings.seed == SEED_UPPER and params.eta > 0:
        state, outcome = find_stationary(system, _upper_state(layout, ensemble, params), integrator)
        if outcome.is_stationary:
            result = StationaryResult(order, outcome.amplitude, outcome, None)
        else:
            logger.warning(f"{order.value}: upper-branch seed gave {outcome.describe()}, falling back to basin scan")
    if result is None:
        basin = basin_scan(system, settings.sz0_grid, integrator)
        result = StationaryResult(order, basin.outcome.amplitude, basin.outcome, basin.sz0)

    if key is not None:
        run_cache.store_stationary(key, order.value, params.eta, ensemble.total_spins, result.abs_a_sq,
                                   result.sz0, result.outcome.kind.value, result.outcome.final_time)
    return result


def deviation_triple(params: PhysicalParams, ensemble: ClusterEnsemble, eta: float,
                     settings: Optional[SweepSettings] = None,
                     eta_ratio: Optional[float] = None) -> DeviationTriple:
    """Отклонения CE1-CE2, CE2-CE3, CE1-CE3 стационарного |⟨a⟩|².

    Порядок без стационара, в том числе при ошибке интегрирования, даёт
    NonStationaryError с именем порядка.
    """
    driven = params.with_eta(eta)
    amplitudes = []
    for order in CumulantOrder:
        try:
            amplitudes.append(stationary_amplitude(order, driven, ensemble, settings, eta_ratio).abs_a_sq)
        except BasinExhaustedError as e:
            last = e.attempts[-1][1] if e.attempts else None
            raise NonStationaryError(f"{order.value}: {e}", order=order.value, outcome=last) from e
        except (StiffnessError, NoConvergenceError) as e:
            raise NonStationaryError(f"{order.value}: {type(e).__name__}: {e}", order=order.value, outcome=None,
                                     reason=type(e).__name__) from e
    return DeviationTriple.from_amplitudes(*amplitudes)


def reference_drives(ensemble: ClusterEnsemble, params: PhysicalParams) -> CriticalDrives:
    """Критические накачки: замкнутая формула для резонансного однородного ансамбля"""
    if ensemble.is_homogeneous and params.delta_c == 0 and ensemble.g[0] > 0:
        n0 = saturation_photon_number(float(ensemble.g[0]), params.gamma_h)
        return critical_drives(cooperativity(ensemble, params), n0, params.kappa)
    return ensemble_critical_drives(ensemble, params)


@dataclass
class ScaledEnsembleFactory:
    """(N, η/η_crit) -> (ансамбль, параметры) при фиксированной кооперативности"""
    base: ClusterEnsemble
    params: PhysicalParams
    reference: str = REFERENCE_PLUS
    drives: Optional[CriticalDrives] = None

    def __post_init__(self):
        if self.reference not in (REFERENCE_PLUS, REFERENCE_MINUS):
            raise InvalidParameterError(f"Неизвестная опорная накачка: {self.reference}")
        if self.drives is None:
            self.drives = reference_drives(self.base, self.params)

    @property
    def cooperativity(self) -> float:
        return cooperativity(self.base, self.params)

    @property
    def eta_crit(self) -> float:
        return self.drives.eta_plus if self.reference == REFERENCE_PLUS else self.drives.eta_minus

    def __call__(self, n: float, eta_ratio: float) -> Tuple[ClusterEnsemble, PhysicalParams]:
        return scale_ensemble(self.base, self.params.with_eta(eta_ratio * self.eta_crit), n)


@dataclass
class BoundaryPoint:
    c: float
    eta_ratio: float
    n_sc: Optional[float]
    deviations: Optional[DeviationTriple]
    outcomes: Dict[str, str] = field(default_factory=dict)
    status: str = 'ok'
    gamma_mhz: Optional[float] = None
    trace: List[dict] = field(default_factory=list)


def n_grid(n_range: Tuple[float, float], points_per_decade: int) -> np.ndarray:
    """Геометрическая сетка целых N"""
    n_lo, n_hi = n_range
    if n_lo < 1 or n_hi <= n_lo:
        raise InvalidGridError(f"Некорректный диапазон N: {n_range}")
    if points_per_decade < 1:
        raise InvalidGridError(f"points_per_decade должно быть положительным: {points_per_decade}")
    count = max(2, int(np.ceil(np.log10(n_hi / n_lo) * points_per_decade)) + 1)
    return np.unique(np.round(np.geomspace(n_lo, n_hi, count)).astype(int))


def nsc_search(factory: ScaledEnsembleFactory, eta_ratio: float, delta_eps: float = 1e-2,
               n_range: Tuple[float, float] = (10, 1e5), confirm_points: int = 3,
               settings: Optional[SweepSettings] = None, points_per_decade: int = 8,
               refine: bool = True) -> BoundaryPoint:
    """Наименьшее N, при котором все три отклонения меньше delta_eps.

    Критерий должен выполняться и в confirm_points следующих точках сетки
    (у верхнего края диапазона окно укорачивается). Найденный интервал
    сетки уточняется целочисленной бисекцией.
    """
    if confirm_points < 2:
        raise ContractViolation(f"confirm_points должно быть не меньше 2: {confirm_points}")
    if delta_eps <= 0:
        raise InvalidParameterError(f"delta_eps должно быть положительным: {delta_eps}")
    grid = n_grid(n_range, points_per_decade)
    evaluated: Dict[int, Tuple[bool, Optional[DeviationTriple], Dict[str, str]]] = {}
    trace: List[dict] = []

    def passes(n: int) -> bool:
        if n in evaluated:
            return evaluated[n][0]
        ensemble, params = factory(n, eta_ratio)
        row = {'n': n, 'd12': np.nan, 'd23': np.nan, 'd13': np.nan, 'status': 'ok'}
        try:
            triple = deviation_triple(params, ensemble, params.eta, settings, eta_ratio)
            ok = triple.below(delta_eps)
            row.update(d12=triple.d12, d23=triple.d23, d13=triple.d13)
            outcomes = {order.value: OutcomeKind.STATIONARY.value for order in CumulantOrder}
        except NonStationaryError as e:
            ok, triple = False, None
            kind = e.outcome.kind.value if e.outcome is not None else (e.reason or 'unknown')
            row['status'] = f"nonstationary:{e.order}:{kind}"
            outcomes = {e.order: kind}
            logger.warning(f"N={n}: {row['status']}")
        evaluated[n] = (ok, triple, outcomes)
        trace.append(row)
        logger.debug(f"N={n}: {row}")
        return ok

    found = None
    for i in range(len(grid)):
        if not passes(int(grid[i])):
            continue
        window = grid[i + 1:i + 1 + confirm_points]
        if all(passes(int(n)) for n in window):
            found = i
            break

    if found is None:
        raise BoundaryNotFoundError(
            f"Критерий δε={delta_eps} не выполнен на N∈[{grid[0]}, {grid[-1]}] при η/η_crit={eta_ratio}",
            trace=trace)

    n_sc = int(grid[found])
    if refine and found > 0:
        lo, hi = int(grid[found - 1]), n_sc
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if passes(mid):
                hi = mid
            else:
                lo = mid
        n_sc = hi

    _, triple, outcomes = evaluated[n_sc]
    logger.info(f"C={factory.cooperativity:.4g}, η/η_crit={eta_ratio}: N_sc={n_sc}")
    return BoundaryPoint(c=factory.cooperativity, eta_ratio=eta_ratio, n_sc=float(n_sc), deviations=triple,
                         outcomes=outcomes, trace=sorted(trace, key=lambda r: r['n']))


@dataclass(frozen=True)
class BoundaryTask:
    factory: ScaledEnsembleFactory
    eta_ratio: float
    label: str
    gamma_mhz: Optional[float] = None
    delta_eps: float = 1e-2
    n_range: Tuple[float, float] = (10, 1e5)
    confirm_points: int = 3
    points_per_decade: int = 8
    settings: SweepSettings = field(default_factory=SweepSettings)


def _boundary_key(task: BoundaryTask) -> str:
    return run_cache.make_key(kind='boundary', label=task.label, eta_ratio=task.eta_ratio,
                              delta=task.factory.base.delta, g=task.factory.base.g, weight=task.factory.base.weight,
                              params=task.factory.params.as_dict(), reference=task.factory.reference,
                              delta_eps=task.delta_eps, n_range=list(task.n_range),
                              confirm_points=task.confirm_points, points_per_decade=task.points_per_decade,
                              seed=task.settings.seed, sz0_grid=list(task.settings.sz0_grid),
                              integrator=task.settings.integrator.as_dict())


def _run_boundary_task(task: BoundaryTask) -> BoundaryPoint:
    c = task.factory.cooperativity
    key = _boundary_key(task) if run_cache.cache_enabled(task.settings.use_cache) else None
    if key is not None:
        hit = run_cache.lookup_boundary(key)
        if hit is not None:
            logger.info(f"{task.label}, η/η_crit={task.eta_ratio}: из кэша")
            deviations = None if hit['d12'] is None else DeviationTriple(hit['d12'], hit['d23'], hit['d13'])
            return BoundaryPoint(c=c, eta_ratio=task.eta_ratio, n_sc=hit['n_sc'], deviations=deviations,
                                 status=hit['status'], gamma_mhz=task.gamma_mhz)
    try:
        point = nsc_search(task.factory, task.eta_ratio, task.delta_eps, task.n_range, task.confirm_points,
                           task.settings, task.points_per_decade)
        point.gamma_mhz = task.gamma_mhz
    except BoundaryNotFoundError as e:
        logger.warning(f"{task.label}, η/η_crit={task.eta_ratio}: {e}")
        point = BoundaryPoint(c=c, eta_ratio=task.eta_ratio, n_sc=None, deviations=None, status='not_found',
                              gamma_mhz=task.gamma_mhz, trace=e.trace)
    except SimulationError as e:
        logger.error(f"{task.label}, η/η_crit={task.eta_ratio}: {type(e).__name__}: {e}")
        point = BoundaryPoint(c=c, eta_ratio=task.eta_ratio, n_sc=None, deviations=None,
                              status=f"error:{type(e).__name__}", gamma_mhz=task.gamma_mhz)
    if key is not None:
        d = point.deviations
        run_cache.store_boundary(key, task.label, task.eta_ratio, point.n_sc, d.d12 if d else None,
                                 d.d23 if d else None, d.d13 if d else None, point.status)
    return point


def boundary_sweep(tasks: Sequence[BoundaryTask], workers: int = 1) -> List[BoundaryPoint]:
    """N_sc по сетке (ансамбль x η/η_crit); ошибки точек записываются в status"""
    for task in tasks:
        if task.eta_ratio == 1.0:
            raise InvalidGridError("Сетка η/η_crit не должна содержать 1 (критическое замедление)")
        if task.eta_ratio <= 0:
            raise InvalidGridError(f"η/η_crit должно быть положительным: {task.eta_ratio}")
    return run_parallel(_run_boundary_task, tasks, workers)


def boundary_frame(points: Sequence[BoundaryPoint], by_gamma: bool = False) -> pd.DataFrame:
    first = 'gamma_mhz' if by_gamma else 'c'
    records = []
    for p in points:
        d = p.deviations
        records.append({first: p.gamma_mhz if by_gamma else p.c, 'eta_over_etacrit': p.eta_ratio,
                        'n_sc': p.n_sc if p.n_sc is not None else np.nan,
                        'd12': d.d12 if d else np.nan, 'd23': d.d23 if d else np.nan,
                        'd13': d.d13 if d else np.nan, 'status': p.status})
    return pd.DataFrame.from_records(records, columns=[first, 'eta_over_etacrit', 'n_sc', 'd12', 'd23', 'd13',
                                                       'status'])


# --- сканы для scan и normalized ----------------------------------------------

@dataclass(frozen=True)
class StationaryTask:
    order: str
    ensemble: ClusterEnsemble
    params: PhysicalParams
    eta_ratio: float
    settings: SweepSettings
    labels: Tuple[Tuple[str, float], ...] = ()


def _semiclassical_amplitude(task: StationaryTask) -> float:
    guess = np.inf if task.settings.seed == SEED_UPPER else 0.0
    return inhom_steady_state(task.ensemble, task.params, task.params.eta, guess).x


def _run_stationary_task(task: StationaryTask) -> dict:
    row = dict(task.labels)
    row.update(order=task.order, eta_over_etacrit=task.eta_ratio, eta=task.params.eta)
    x_sc = _semiclassical_amplitude(task)
    row['abs_a_sq_sc'] = x_sc
    try:
        result = stationary_amplitude(task.order, task.params, task.ensemble, task.settings, task.eta_ratio)
        row.update(abs_a_sq=result.abs_a_sq, sz0=np.nan if result.sz0 is None else result.sz0,
                   outcome=result.outcome.kind.value)
    except BasinExhaustedError as e:
        last = e.attempts[-1][1]
        row.update(abs_a_sq=last.amplitude, sz0=np.nan, outcome=last.kind.value)
        logger.warning(f"{row}: {e}")
    except SimulationError as e:
        row.update(abs_a_sq=np.nan, sz0=np.nan, outcome=f"error:{type(e).__name__}")
        logger.error(f"{row}: {e}")
    row['normalized'] = normalized_amplitude(row['abs_a_sq'], x_sc) if x_sc > 0 else np.nan
    return row


def transmission_scan(factory: ScaledEnsembleFactory, n_values: Sequence[float], eta_ratios: Sequence[float],
                      orders: Sequence, settings: Optional[SweepSettings] = None,
                      workers: int = 1) -> pd.DataFrame:
    """Стационарные |⟨a⟩|² порядков CE против η для списка N"""
    settings = settings or SweepSettings()
    if len(n_values) == 0 or len(eta_ratios) == 0:
        raise InvalidGridError("Сетки N и η не должны быть пустыми")
    tasks = []
    for n in n_values:
        for ratio in eta_ratios:
            ensemble, params = factory(n, ratio)
            for order in orders:
                tasks.append(StationaryTask(CumulantOrder.parse(order).value, ensemble, params, float(ratio),
                                            settings, labels=(('n', float(n)),)))
    rows = run_parallel(_run_stationary_task, tasks, workers)
    columns = ['n', 'order', 'eta_over_etacrit', 'eta', 'abs_a_sq', 'abs_a_sq_sc', 'normalized', 'sz0', 'outcome']
    return pd.DataFrame.from_records(rows, columns=columns)


def normalized_scan(factories: Sequence[ScaledEnsembleFactory], n_values: Sequence[float], eta_ratio: float,
                    orders: Sequence, settings: Optional[SweepSettings] = None,
                    workers: int = 1) -> pd.DataFrame:
    """Нормированная амплитуда |ã|² против N для набора кооперативностей"""
    settings = settings or SweepSettings()
    if len(n_values) == 0 or len(factories) == 0:
        raise InvalidGridError("Сетки N и C не должны быть пустыми")
    tasks = []
    for factory in factories:
        c = round(factory.cooperativity, 10)
        for n in n_values:
            ensemble, params = factory(n, eta_ratio)
            for order in orders:
                tasks.append(StationaryTask(CumulantOrder.parse(order).value, ensemble, params, float(eta_ratio),
                                            settings, labels=(('c', c), ('n', float(n)))))
    rows = run_parallel(_run_stationary_task, tasks, workers)
    columns = ['c', 'n', 'order', 'eta_over_etacrit', 'abs_a_sq', 'abs_a_sq_sc', 'normalized', 'sz0', 'outcome']
    return pd.DataFrame.from_records(rows, columns=columns)
