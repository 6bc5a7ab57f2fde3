"""Физические параметры резонатора и ансамбля спинов.

Внутренние единицы: угловые частоты в рад/мкс, время в мкс. Частоты во
входных файлах задаются в МГц и переводятся через mhz_to_angular.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Tuple

import numpy as np

from services.exceptions import InvalidGridError, InvalidParameterError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def mhz_to_angular(value_mhz: float) -> float:
    """МГц -> рад/мкс"""
    return TWO_PI * float(value_mhz)


def angular_to_mhz(value: float) -> float:
    return float(value) / TWO_PI


class CumulantOrder(str, Enum):
    CE1 = 'ce1'
    CE2 = 'ce2'
    CE3 = 'ce3'

    @property
    def rank(self) -> int:
        return int(self.value[-1])

    @classmethod
    def parse(cls, value) -> 'CumulantOrder':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"Неизвестный порядок разложения: {value}")


@dataclass(frozen=True)
class PhysicalParams:
    """Параметры резонатора и спинов (рад/мкс).

    Значения по умолчанию: κ = 2γ_h = 2π·1 МГц, резонансная накачка.
    """
    kappa: float = TWO_PI
    gamma_h: float = np.pi
    gamma_p: float = 0.0
    delta_c: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        values = (self.kappa, self.gamma_h, self.gamma_p, self.delta_c, self.eta)
        if not all(np.isfinite(v) for v in values):
            raise InvalidParameterError("Параметры должны быть конечными числами")
        if self.kappa <= 0:
            raise InvalidParameterError(f"kappa должна быть положительной: {self.kappa}")
        if self.gamma_h <= 0:
            raise InvalidParameterError(f"gamma_h должна быть положительной: {self.gamma_h}")
        if self.gamma_p < 0:
            raise InvalidParameterError(f"gamma_p не может быть отрицательной: {self.gamma_p}")
        if self.eta < 0:
            raise InvalidParameterError(f"eta не может быть отрицательной: {self.eta}")

    @classmethod
    def from_mhz(cls, kappa_mhz: float = 1.0, gamma_h_mhz: float = 0.5, gamma_p_mhz: float = 0.0,
                 delta_c_mhz: float = 0.0, eta_mhz: float = 0.0) -> 'PhysicalParams':
        return cls(kappa=mhz_to_angular(kappa_mhz), gamma_h=mhz_to_angular(gamma_h_mhz),
                   gamma_p=mhz_to_angular(gamma_p_mhz), delta_c=mhz_to_angular(delta_c_mhz),
                   eta=mhz_to_angular(eta_mhz))

    @property
    def gamma_perp(self) -> float:
        """Поперечная скорость релаксации γ_⊥ = γ_h + 2γ_p"""
        return self.gamma_h + 2.0 * self.gamma_p

    def with_eta(self, eta: float) -> 'PhysicalParams':
        return replace(self, eta=float(eta))

    def as_dict(self) -> dict:
        return {'kappa': self.kappa, 'gamma_h': self.gamma_h, 'gamma_p': self.gamma_p,
                'delta_c': self.delta_c, 'eta': self.eta}


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ClusterEnsemble:
    """Ансамбль спинов, разбитый на L частотных кластеров.

    Веса M_μ вещественные: кратности входят в уравнения только через
    взвешенные суммы, поэтому нецелые значения допустимы.
    """
    delta: np.ndarray
    g: np.ndarray
    weight: np.ndarray
    total_spins: float = field(default=None)

    def __post_init__(self):
        delta = _frozen_array(self.delta)
        g = _frozen_array(self.g)
        weight = _frozen_array(self.weight)
        object.__setattr__(self, 'delta', delta)
        object.__setattr__(self, 'g', g)
        object.__setattr__(self, 'weight', weight)
        if self.total_spins is None:
            object.__setattr__(self, 'total_spins', float(weight.sum()))
        else:
            object.__setattr__(self, 'total_spins', float(self.total_spins))

        if delta.size == 0:
            raise InvalidParameterError("Ансамбль должен содержать хотя бы один кластер")
        if not (delta.size == g.size == weight.size):
            raise InvalidParameterError(
                f"Размеры массивов не совпадают: delta={delta.size}, g={g.size}, weight={weight.size}")
        if not (np.all(np.isfinite(delta)) and np.all(np.isfinite(g)) and np.all(np.isfinite(weight))):
            raise InvalidParameterError("Параметры кластеров должны быть конечными")
        if np.any(weight < 0):
            raise InvalidParameterError("Веса кластеров не могут быть отрицательными")
        if np.any(g < 0):
            raise InvalidParameterError("Константы связи не могут быть отрицательными")
        if np.any(np.diff(delta) <= 0):
            raise InvalidGridError("Отстройки кластеров должны строго возрастать")
        if self.total_spins <= 0:
            raise InvalidParameterError(f"Число спинов должно быть положительным: {self.total_spins}")
        if abs(weight.sum() - self.total_spins) > 1e-12 * self.total_spins:
            raise InvalidParameterError(
                f"Сумма весов {weight.sum()!r} не равна числу спинов {self.total_spins!r}")

    @property
    def size(self) -> int:
        """Число кластеров L"""
        return int(self.delta.size)

    @property
    def is_homogeneous(self) -> bool:
        return self.size == 1 and self.delta[0] == 0.0

    def as_dict(self) -> dict:
        return {'delta': self.delta.tolist(), 'g': self.g.tolist(), 'weight': self.weight.tolist(),
                'total_spins': self.total_spins}


def homogeneous_ensemble(n: float, g: float) -> ClusterEnsemble:
    """Один резонансный кластер (Δ=0, g, M=N)"""
    return ClusterEnsemble(delta=[0.0], g=[g], weight=[n], total_spins=n)


def cooperativity(ensemble: ClusterEnsemble, params: PhysicalParams) -> float:
    """C = (1/κγ_h) Σ_μ M_μ g_μ² / (1 + Δ_μ²/γ_h²)"""
    weighted = ensemble.weight * ensemble.g ** 2 / (1.0 + (ensemble.delta / params.gamma_h) ** 2)
    return float(np.sum(weighted) / (params.kappa * params.gamma_h))


def coupling_for_cooperativity(c: float, n: float, params: PhysicalParams) -> float:
    """Константа связи, при которой однородный ансамбль из n спинов имеет кооперативность c"""
    if c < 0 or n <= 0:
        raise InvalidParameterError(f"Недопустимые значения: C={c}, N={n}")
    return float(np.sqrt(c * params.kappa * params.gamma_h / n))


def saturation_photon_number(g: float, gamma_h: float) -> float:
    """n₀ = γ_h² / 2g²"""
    if g <= 0:
        raise InvalidParameterError(f"Число насыщения не определено при g={g}")
    return gamma_h ** 2 / (2.0 * g ** 2)


def scale_ensemble(ensemble: ClusterEnsemble, params: PhysicalParams,
                   n_target: float) -> Tuple[ClusterEnsemble, PhysicalParams]:
    """Преобразование, сохраняющее кооперативность: N -> n_target.

    g_μ -> g_μ √(N/n'), η -> η √(n'/N), веса масштабируются пропорционально.
    """
    if n_target <= 0:
        raise InvalidParameterError(f"n_target должно быть положительным: {n_target}")
    ratio = n_target / ensemble.total_spins
    scaled = ClusterEnsemble(delta=ensemble.delta, g=ensemble.g / np.sqrt(ratio),
                             weight=ensemble.weight * ratio, total_spins=n_target)
    return scaled, params.with_eta(params.eta * np.sqrt(ratio))


def gaussian_ensemble(n: float, gamma_fwhm: float, l: int, span: float, g: float) -> ClusterEnsemble:
    """Гауссово распределение N спинов по L кластерам.

    Args:
        n: Полное число спинов
        gamma_fwhm: Полная ширина на полувысоте Γ (рад/мкс)
        l: Нечётное число кластеров (Δ=0 принадлежит сетке)
        span: Полуширина сетки в единицах Γ
        g: Общая константа связи

    Returns:
        ClusterEnsemble: Δ_μ равномерно на [-span·Γ, span·Γ]
    """
    if l < 3 or l % 2 == 0:
        raise InvalidGridError(f"Число кластеров должно быть нечётным и не меньше 3: {l}")
    if gamma_fwhm <= 0 or span <= 0 or n <= 0:
        raise InvalidParameterError(f"Недопустимые параметры распределения: N={n}, Γ={gamma_fwhm}, span={span}")
    delta = np.linspace(-span * gamma_fwhm, span * gamma_fwhm, l)
    # точная симметрия сетки
    delta = 0.5 * (delta - delta[::-1])
    profile = np.exp(-4.0 * np.log(2.0) * delta ** 2 / gamma_fwhm ** 2)
    weight = n * profile / profile.sum()
    logger.debug(f"Gaussian ensemble: N={n}, Γ={gamma_fwhm:.4g}, L={l}, span={span}")
    return ClusterEnsemble(delta=delta, g=np.full(l, g), weight=weight, total_spins=n)
