"""Стационарные решения уравнений среднего поля (CE1).

Однородный случай сводится к кубическому уравнению относительно
u = x/n₀; неоднородный к скалярному уравнению самосогласования по
x = |⟨a⟩|². В обоих случаях корни ищутся brentq на монотонных участках
между точками поворота кривой η(x).
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from services.exceptions import InvalidGridError, InvalidParameterError, NoConvergenceError
from services.model import ClusterEnsemble, PhysicalParams

logger = logging.getLogger(__name__)

LOWER, MIDDLE, UPPER = 'lower', 'middle', 'upper'

# относительное расстояние, на котором два корня считаются слившимися
_MERGE_TOL = 1e-6
# относительная близость накачки к критической, при которой корень считается двойным
_TANGENT_TOL = 1e-12


@dataclass(frozen=True)
class BranchPoint:
    x: float
    eta: float
    branch: str
    stable: bool
    tangent: bool = False


@dataclass(frozen=True)
class CriticalDrives:
    """Критические накачки.

    При bistable=False оба поля eta_* содержат накачку максимального наклона dx/dη,
    а если локального максимума нет, то максимального d ln x / d ln η.
    """
    eta_minus: float
    eta_plus: float
    x_at_eta_minus: float
    x_at_eta_plus: float
    bistable: bool


def is_bistable(c: float) -> bool:
    if c < 0:
        raise InvalidParameterError(f"Кооперативность не может быть отрицательной: {c}")
    return c > 8.0


def _reduced_drive(u: float, c: float) -> float:
    """y(u) = u(1 + C/(1+u))², где y = η²/(κ²n₀)"""
    return u * (1.0 + c / (1.0 + u)) ** 2


def _cubic(u: float, c: float, y: float) -> float:
    return u ** 3 + (2.0 * (1.0 + c) - y) * u ** 2 + ((1.0 + c) ** 2 - 2.0 * y) * u - y


def _cubic_slope(u: float, c: float, y: float) -> float:
    return 3.0 * u ** 2 + 2.0 * (2.0 * (1.0 + c) - y) * u + ((1.0 + c) ** 2 - 2.0 * y)


def _turning_points(c: float) -> Optional[Tuple[float, float]]:
    """Корни u² + (2-C)u + (1+C) = 0 при C ≥ 8"""
    if c < 8.0:
        return None
    disc = np.sqrt(max(c * (c - 8.0), 0.0))
    return 0.5 * ((c - 2.0) - disc), 0.5 * ((c - 2.0) + disc)


def _drive_slope(s: float, c: float) -> float:
    """d√y/du как функция s = ln u; пропорционален dη/dx"""
    u = np.exp(s)
    return (1.0 + c * (1.0 - u) / (1.0 + u) ** 2) / (2.0 * np.sqrt(u))


def _slope_peak(drive_slope: Callable[[float], float], lo: float, hi: float,
                points: int = 4001) -> Optional[float]:
    """Локальный максимум dx/dη на отрезке [lo, hi] по логарифму x.

    Первый внутренний минимум dη/dx на сетке уточняется золотым сечением.
    None, если dη/dx монотонна и конечного максимума наклона нет.
    """
    grid = np.linspace(lo, hi, points)
    values = np.array([drive_slope(s) for s in grid])
    inner = np.nonzero((values[1:-1] < values[:-2]) & (values[1:-1] < values[2:]))[0]
    if inner.size == 0:
        return None
    i = int(inner[0]) + 1
    result = minimize_scalar(drive_slope, bracket=(grid[i - 1], grid[i], grid[i + 1]), method='golden',
                             tol=1e-10)
    return float(result.x)


@lru_cache(maxsize=256)
def _max_slope_point(c: float) -> float:
    """u, при котором dx/dη максимален.

    Без локального максимума берётся максимум d ln x / d ln η, он лежит при u = √(1+C).
    """
    s = _slope_peak(lambda t: _drive_slope(t, c), np.log(1e-6), np.log(1e6))
    return float(np.exp(s)) if s is not None else float(np.sqrt(1.0 + c))


def homogeneous_steady_states(c: float, n0: float, eta: float, kappa: float) -> List[BranchPoint]:
    """Все неотрицательные корни x(1 + C/(1+x/n₀))² = η²/κ², по возрастанию.

    Args:
        c: Кооперативность C ≥ 0
        n0: Число насыщения n₀ > 0
        eta: Амплитуда накачки
        kappa: Скорость потерь резонатора

    Returns:
        List[BranchPoint]: 1, 2 (касание) или 3 корня
    """
    if c < 0 or n0 <= 0 or kappa <= 0 or eta < 0:
        raise InvalidParameterError(f"Недопустимые параметры: C={c}, n0={n0}, kappa={kappa}, eta={eta}")
    if eta == 0:
        return [BranchPoint(x=0.0, eta=0.0, branch=LOWER, stable=True)]

    y = (eta / kappa) ** 2 / n0
    turning = _turning_points(c) if c > 8.0 else None
    if turning is None:
        segments = [(0.0, None, LOWER, True)]
        tangents = []
    else:
        u_minus, u_plus = turning
        segments = [(0.0, u_minus, LOWER, True), (u_minus, u_plus, MIDDLE, False), (u_plus, None, UPPER, True)]
        # двойной корень в точке поворота: знак кубики там определяется шумом округления
        tangents = [(t, label) for t, label in ((u_minus, LOWER), (u_plus, UPPER))
                    if abs(_reduced_drive(t, c) - y) <= _TANGENT_TOL * y]

    roots = [(t, label, True, True) for t, label in tangents]
    for lo, hi, label, stable in segments:
        if hi is None:
            hi = max(lo, y) + 1.0
        f_lo, f_hi = _cubic(lo, c, y), _cubic(hi, c, y)
        if f_lo == 0.0:
            root = lo
        elif f_hi == 0.0:
            root = hi
        elif np.sign(f_lo) == np.sign(f_hi):
            continue
        else:
            root = brentq(_cubic, lo, hi, args=(c, y), xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if any(abs(root - r[0]) <= _MERGE_TOL * max(root, 1.0) for r in roots):
            continue
        slope = _cubic_slope(root, c, y)
        if slope != 0.0:
            polished = root - _cubic(root, c, y) / slope
            if polished >= 0 and abs(_cubic(polished, c, y)) <= abs(_cubic(root, c, y)):
                root = polished
        roots.append((root, label, stable, False))

    points = []
    for u, label, stable, tangent in sorted(roots):
        if turning is None:
            label = LOWER if u <= _max_slope_point(c) else UPPER
        points.append(BranchPoint(x=u * n0, eta=eta, branch=label, stable=stable, tangent=tangent))
    return points


def critical_drives(c: float, n0: float, kappa: float) -> CriticalDrives:
    """Точки поворота S-кривой; для C ≤ 8 накачка максимального наклона.

    η+_crit соответствует концу нижней ветви (u₋), η−_crit концу верхней (u₊).
    """
    if c <= 0 or n0 <= 0 or kappa <= 0:
        raise InvalidParameterError(f"Недопустимые параметры: C={c}, n0={n0}, kappa={kappa}")
    if c >= 8.0:
        u_minus, u_plus = _turning_points(c)
        eta_plus = kappa * np.sqrt(n0 * _reduced_drive(u_minus, c))
        eta_minus = kappa * np.sqrt(n0 * _reduced_drive(u_plus, c))
        return CriticalDrives(eta_minus=eta_minus, eta_plus=eta_plus, x_at_eta_minus=u_plus * n0,
                              x_at_eta_plus=u_minus * n0, bistable=c > 8.0)
    u_star = _max_slope_point(c)
    eta_star = kappa * np.sqrt(n0 * _reduced_drive(u_star, c))
    return CriticalDrives(eta_minus=eta_star, eta_plus=eta_star, x_at_eta_minus=u_star * n0,
                          x_at_eta_plus=u_star * n0, bistable=False)


# --- неоднородный ансамбль ---------------------------------------------------

class _SelfConsistency:
    """Уравнение x|D(x)|² = η² для ансамбля кластеров.

    D(x) = κ + iΔ_c + Σ_μ M_μ g_μ² |σz_μ(x)| / (γ_⊥ + iΔ_μ),
    σz_μ(x) = -1/(1 + b_μ x), b_μ = 2g_μ²γ_⊥ / (γ_h(γ_⊥² + Δ_μ²)).
    """

    def __init__(self, ensemble: ClusterEnsemble, params: PhysicalParams):
        self.ensemble = ensemble
        self.params = params
        gperp = params.gamma_perp
        self._response = ensemble.weight * ensemble.g ** 2 / (gperp + 1j * ensemble.delta)
        self._b = 2.0 * ensemble.g ** 2 * gperp / (params.gamma_h * (gperp ** 2 + ensemble.delta ** 2))
        self._bare = params.kappa + 1j * params.delta_c
        self._x_star = None

    def inversion(self, x: float) -> np.ndarray:
        return -1.0 / (1.0 + self._b * x)

    def dispersion(self, x: float) -> complex:
        return self._bare + np.sum(self._response / (1.0 + self._b * x))

    def dispersion_slope(self, x: float) -> complex:
        return -np.sum(self._response * self._b / (1.0 + self._b * x) ** 2)

    def residual(self, x: float, eta: float) -> float:
        return x * abs(self.dispersion(x)) ** 2 - eta ** 2

    def log_slope(self, log_x: float) -> float:
        """d ln η / d ln x; отрицателен на неустойчивых участках"""
        x = np.exp(log_x)
        d = self.dispersion(x)
        return 0.5 + x * float(np.real(self.dispersion_slope(x) * np.conj(d))) / abs(d) ** 2

    def drive(self, x: float) -> float:
        return float(np.sqrt(x) * abs(self.dispersion(x)))

    def saturation_scale(self) -> float:
        b_max = float(np.max(self._b)) if np.any(self._b > 0) else 0.0
        return 1.0 / b_max if b_max > 0 else 1.0

    def turning_points(self) -> List[float]:
        scale = self.saturation_scale()
        grid = np.linspace(np.log(scale * 1e-6), np.log(scale * 1e6), 2401)
        values = np.array([self.log_slope(s) for s in grid])
        points = []
        for i in np.nonzero(np.sign(values[:-1]) != np.sign(values[1:]))[0]:
            s = brentq(self.log_slope, grid[i], grid[i + 1], xtol=1e-14)
            points.append(float(np.exp(s)))
        return points

    def drive_slope(self, log_x: float) -> float:
        """dη/dx при x = exp(log_x)"""
        x = np.exp(log_x)
        d = self.dispersion(x)
        cross = float(np.real(self.dispersion_slope(x) * np.conj(d)))
        return float(abs(d) / (2.0 * np.sqrt(x)) + np.sqrt(x) * cross / abs(d))

    def max_slope_point(self) -> float:
        if self._x_star is None:
            scale = self.saturation_scale()
            lo, hi = np.log(scale * 1e-6), np.log(scale * 1e6)
            s = _slope_peak(self.drive_slope, lo, hi)
            if s is None:
                result = minimize_scalar(self.log_slope, bounds=(lo, hi), method='bounded',
                                         options={'xatol': 1e-12})
                s = result.x
            self._x_star = float(np.exp(s))
        return self._x_star

    def roots(self, eta: float, turning: Sequence[float]) -> List[BranchPoint]:
        if eta == 0:
            return [BranchPoint(x=0.0, eta=0.0, branch=LOWER, stable=True)]
        # Re D ≥ κ, поэтому все корни лежат в [0, η²/κ²]
        x_max = (eta / self.params.kappa) ** 2 * (1.0 + 1e-9)
        inner = [t for t in turning if t < x_max]
        edges = [0.0] + inner + [x_max]
        n_segments = len(turning) + 1

        def label_for(index: int, x: float) -> str:
            if n_segments == 1:
                return LOWER if x <= self.max_slope_point() else UPPER
            if index == 0:
                return LOWER
            return UPPER if index == n_segments - 1 else MIDDLE

        roots = []
        for number, t in enumerate(inner, start=1):
            if abs(self.residual(t, eta)) <= _TANGENT_TOL * eta ** 2:
                # устойчивый соседний участок: слева для нечётной точки поворота
                index = number - 1 if number % 2 == 1 else number
                roots.append(BranchPoint(x=float(t), eta=eta, branch=label_for(index, t),
                                         stable=True, tangent=True))
        for index in range(len(edges) - 1):
            lo, hi = edges[index], edges[index + 1]
            f_lo, f_hi = self.residual(lo, eta), self.residual(hi, eta)
            if f_lo == 0.0:
                x = lo
            elif np.sign(f_lo) == np.sign(f_hi):
                continue
            else:
                try:
                    x = brentq(self.residual, lo, hi, args=(eta,), xtol=1e-14 * max(hi, 1e-300),
                               rtol=4 * np.finfo(float).eps, maxiter=200)
                except RuntimeError as e:
                    raise NoConvergenceError(f"Корень не найден на [{lo:.6g}, {hi:.6g}]: {e}",
                                             residual=abs(self.residual(0.5 * (lo + hi), eta)) / eta ** 2)
            if any(abs(x - r.x) <= _MERGE_TOL * max(x, 1e-300) for r in roots):
                continue
            roots.append(BranchPoint(x=float(x), eta=eta, branch=label_for(index, x), stable=index % 2 == 0))
        return sorted(roots, key=lambda point: point.x)


def inhom_steady_states(ensemble: ClusterEnsemble, params: PhysicalParams, eta: float) -> List[BranchPoint]:
    """Все сосуществующие корни самосогласования при заданной накачке"""
    if eta < 0:
        raise InvalidParameterError(f"eta не может быть отрицательной: {eta}")
    problem = _SelfConsistency(ensemble, params)
    return problem.roots(eta, problem.turning_points())


def inhom_steady_state(ensemble: ClusterEnsemble, params: PhysicalParams, eta: float,
                       x_guess: float) -> BranchPoint:
    """Стационар, в бассейн которого попадает x_guess.

    Неустойчивые корни разделяют бассейны устойчивых.
    """
    if x_guess < 0:
        raise InvalidParameterError(f"x_guess не может быть отрицательным: {x_guess}")
    roots = inhom_steady_states(ensemble, params, eta)
    if not roots:
        problem = _SelfConsistency(ensemble, params)
        raise NoConvergenceError("Стационар не найден", residual=abs(problem.residual(x_guess, eta)))
    if len(roots) == 1:
        return roots[0]
    for root in roots:
        if not root.stable and root.x == x_guess:
            return root
    lower_edge = 0.0
    for index, root in enumerate(roots):
        if not root.stable:
            lower_edge = root.x
            continue
        upper_edge = next((r.x for r in roots[index + 1:] if not r.stable), np.inf)
        if lower_edge <= x_guess <= upper_edge:
            return root
    return roots[-1]


def ensemble_critical_drives(ensemble: ClusterEnsemble, params: PhysicalParams) -> CriticalDrives:
    """Критические накачки S-кривой произвольного ансамбля"""
    problem = _SelfConsistency(ensemble, params)
    turning = problem.turning_points()
    if len(turning) >= 2:
        x_plus, x_minus = turning[0], turning[-1]
        return CriticalDrives(eta_minus=problem.drive(x_minus), eta_plus=problem.drive(x_plus),
                              x_at_eta_minus=x_minus, x_at_eta_plus=x_plus, bistable=True)
    x_star = turning[0] if turning else problem.max_slope_point()
    eta_star = problem.drive(x_star)
    return CriticalDrives(eta_minus=eta_star, eta_plus=eta_star, x_at_eta_minus=x_star,
                          x_at_eta_plus=x_star, bistable=False)


def semiclassical_curve(ensemble: ClusterEnsemble, params: PhysicalParams,
                        eta_grid: Sequence[float]) -> List[BranchPoint]:
    """S-кривая: все корни для каждой накачки сетки"""
    grid = np.asarray(eta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidGridError("Сетка накачек должна быть непустым одномерным массивом")
    if np.any(np.diff(grid) < 0) or np.any(grid < 0):
        raise InvalidGridError("Сетка накачек должна быть неотрицательной и возрастающей")
    problem = _SelfConsistency(ensemble, params)
    turning = problem.turning_points()
    logger.debug(f"Turning points: {turning}")
    points = []
    for eta in grid:
        points.extend(problem.roots(float(eta), turning))
    return points


def mean_field_moments(ensemble: ClusterEnsemble, params: PhysicalParams, eta: float,
                       x: float) -> Tuple[complex, np.ndarray, np.ndarray]:
    """⟨a⟩, ⟨σ⁻_μ⟩, ⟨σz_μ⟩ в стационарной точке x"""
    problem = _SelfConsistency(ensemble, params)
    a = eta / problem.dispersion(x)
    sz = problem.inversion(x)
    sm = 1j * ensemble.g * sz * a / (params.gamma_perp + 1j * ensemble.delta)
    return complex(a), sm, sz
