"""Уравнения движения моментов резонатора со спиновым ансамблем.

Вектор состояния хранится как плоский вещественный массив: комплексная
переменная занимает два слота (re, im), эрмитова один. Парные семейства
всегда относятся к двум РАЗНЫМ спинам, диагональ (μ, μ) означает два
разных спина одного кластера и присутствует для любых M_μ; её вклад в
суммы входит с весом M_μ - 1.

Суммы Σ_{j≠k} g_j(...) превращаются в Σ_ν w_ν g_ν(...) с
w_ν = M_ν - δ_{μν}; суммы по третьему спину берёт источник моментов
(services/closures.py).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from services.closures import (CumulantClosure, MomentSource, close_third_order,
                               factorize_second_order)
from services.exceptions import ContractViolation, InvalidInitialStateError
from services.model import ClusterEnsemble, CumulantOrder, PhysicalParams

logger = logging.getLogger(__name__)

SCALAR, VECTOR, ORDERED, SYMMETRIC, CONJUGATE_PAIRED = (
    'scalar', 'vector', 'ordered', 'symmetric', 'conjugate-paired')


@dataclass(frozen=True)
class VariableFamily:
    tag: str
    symbol: str
    operators: str
    arity: int
    symmetry: str
    value_kind: str
    rank: int

    @property
    def storage(self) -> str:
        if self.arity == 0:
            return SCALAR
        if self.arity == 1:
            return VECTOR
        return {'none': ORDERED, 'symmetric': SYMMETRIC}.get(self.symmetry, CONJUGATE_PAIRED)

    @property
    def is_complex(self) -> bool:
        return self.value_kind == 'complex'


def _family(tag, symbol, operators, arity, symmetry, value_kind, rank):
    return VariableFamily(tag, symbol, operators, arity, symmetry, value_kind, rank)


FAMILIES = (
    _family('a', '⟨a⟩', 'a', 0, 'none', 'complex', 1),
    _family('sm', '⟨σ⁻⟩', 'sm{k}', 1, 'none', 'complex', 1),
    _family('sz', '⟨σz⟩', 'sz{k}', 1, 'none', 'real', 1),
    _family('sza', '⟨σza⟩', 'sz{k} a', 1, 'none', 'complex', 2),
    _family('zm', '⟨σzσ⁻⟩', 'sz{k} sm{j}', 2, 'none', 'complex', 2),
    _family('smad', '⟨σ⁻a†⟩', 'sm{k} ad', 1, 'none', 'complex', 2),
    _family('pm', '⟨σ⁺σ⁻⟩', 'sp{k} sm{j}', 2, 'conjugate-paired', 'complex', 2),
    _family('sma', '⟨σ⁻a⟩', 'sm{k} a', 1, 'none', 'complex', 2),
    _family('adad', '⟨a†a†⟩', 'ad ad', 0, 'none', 'complex', 2),
    _family('ada', '⟨a†a⟩', 'ad a', 0, 'none', 'real', 2),
    _family('zz', '⟨σzσz⟩', 'sz{k} sz{j}', 2, 'symmetric', 'real', 2),
    _family('mm', '⟨σ⁻σ⁻⟩', 'sm{k} sm{j}', 2, 'symmetric', 'complex', 2),
    _family('szada', '⟨σza†a⟩', 'sz{k} ad a', 1, 'none', 'real', 3),
    _family('smada', '⟨σ⁻a†a⟩', 'sm{k} ad a', 1, 'none', 'complex', 3),
    _family('smadad', '⟨σ⁻a†a†⟩', 'sm{k} ad ad', 1, 'none', 'complex', 3),
    _family('szaa', '⟨σzaa⟩', 'sz{k} a a', 1, 'none', 'complex', 3),
    _family('smaa', '⟨σ⁻aa⟩', 'sm{k} a a', 1, 'none', 'complex', 3),
    _family('adaa', '⟨a†aa⟩', 'ad a a', 0, 'none', 'complex', 3),
    _family('aaa', '⟨aaa⟩', 'a a a', 0, 'none', 'complex', 3),
    _family('zza', '⟨σzσza⟩', 'sz{k} sz{j} a', 2, 'symmetric', 'complex', 3),
    _family('mmad', '⟨σ⁻σ⁻a†⟩', 'sm{k} sm{j} ad', 2, 'symmetric', 'complex', 3),
    _family('pma', '⟨σ⁺σ⁻a⟩', 'sp{k} sm{j} a', 2, 'none', 'complex', 3),
    _family('zmad', '⟨σzσ⁻a†⟩', 'sz{k} sm{j} ad', 2, 'none', 'complex', 3),
    _family('zma', '⟨σzσ⁻a⟩', 'sz{k} sm{j} a', 2, 'none', 'complex', 3),
    _family('mma', '⟨σ⁻σ⁻a⟩', 'sm{k} sm{j} a', 2, 'symmetric', 'complex', 3),
)

FAMILY_BY_TAG = {family.tag: family for family in FAMILIES}


def families_for(order) -> List[VariableFamily]:
    rank = CumulantOrder.parse(order).rank
    return [family for family in FAMILIES if family.rank <= rank]


class _Block:
    """Участок плоского вектора, занятый одним семейством"""

    def __init__(self, family: VariableFamily, l: int, offset: int):
        self.family = family
        self.offset = offset
        storage = family.storage
        if storage == SCALAR:
            self.rows = self.cols = None
            self.count = 1
        elif storage == VECTOR:
            self.rows, self.cols = np.arange(l), None
            self.count = l
        elif storage == ORDERED:
            rows, cols = np.indices((l, l))
            self.rows, self.cols = rows.ravel(), cols.ravel()
            self.count = l * l
        else:
            self.rows, self.cols = np.triu_indices(l)
            self.count = self.rows.size
        self.width = self.count * (2 if family.is_complex else 1)
        self.l = l

    def read(self, y: np.ndarray):
        off, n = self.offset, self.count
        if self.family.is_complex:
            values = y[off:off + 2 * n:2] + 1j * y[off + 1:off + 2 * n:2]
        else:
            values = y[off:off + n].astype(complex)
        storage = self.family.storage
        if storage == SCALAR:
            return values[0]
        if storage == VECTOR:
            return values
        if storage == ORDERED:
            return values.reshape(self.l, self.l)
        full = np.zeros((self.l, self.l), dtype=complex)
        if storage == SYMMETRIC:
            full[self.cols, self.rows] = values
        else:
            full[self.cols, self.rows] = np.conj(values)
        full[self.rows, self.cols] = values
        return full

    def write(self, out: np.ndarray, value) -> None:
        storage = self.family.storage
        if storage == SCALAR:
            values = np.atleast_1d(np.asarray(value))
        elif storage == VECTOR:
            values = np.asarray(value)
        elif storage == ORDERED:
            values = np.asarray(value).ravel()
        else:
            values = np.asarray(value)[self.rows, self.cols]
        off, n = self.offset, self.count
        if self.family.is_complex:
            out[off:off + 2 * n:2] = np.real(values)
            out[off + 1:off + 2 * n:2] = np.imag(values)
        else:
            out[off:off + n] = np.real(values)


class StateLayout:
    """Отображение (семейство, индексы кластеров) -> смещение в плоском векторе"""

    def __init__(self, order, l: int):
        if l < 1:
            raise ContractViolation(f"Число кластеров должно быть положительным: {l}")
        self.order = CumulantOrder.parse(order)
        self.l = int(l)
        self.families = families_for(self.order)
        self._blocks: Dict[str, _Block] = {}
        offset = 0
        for family in self.families:
            block = _Block(family, self.l, offset)
            self._blocks[family.tag] = block
            offset += block.width
        self.total_real_count = offset

    @property
    def tags(self) -> List[str]:
        return [family.tag for family in self.families]

    def unpack(self, y: np.ndarray) -> Dict[str, np.ndarray]:
        self.check(y)
        return {tag: block.read(y) for tag, block in self._blocks.items()}

    def pack(self, moments: Dict[str, np.ndarray]) -> np.ndarray:
        out = np.zeros(self.total_real_count)
        for tag, block in self._blocks.items():
            block.write(out, moments[tag])
        return out

    def check(self, y: np.ndarray) -> None:
        if np.ndim(y) != 1 or len(y) != self.total_real_count:
            raise ContractViolation(
                f"Длина вектора состояния {np.shape(y)} не соответствует разметке ({self.total_real_count})")

    def offset_of(self, tag: str, mu: Optional[int] = None, nu: Optional[int] = None) -> int:
        """Смещение вещественной (или единственной) части переменной"""
        block = self._blocks[tag]
        storage = block.family.storage
        if storage == SCALAR:
            index = 0
        elif storage == VECTOR:
            index = mu
        elif storage == ORDERED:
            index = mu * self.l + nu
        else:
            lo, hi = min(mu, nu), max(mu, nu)
            index = int(np.nonzero((block.rows == lo) & (block.cols == hi))[0][0])
        return block.offset + index * (2 if block.family.is_complex else 1)

    def breakdown(self) -> Dict[str, int]:
        """Число вещественных слотов по семействам"""
        return {tag: block.width for tag, block in self._blocks.items()}

    def describe(self) -> pd.DataFrame:
        """Перечень всех вещественных слотов: family, mu, nu, kind, offset (-1 для отсутствующего индекса)"""
        records = []
        for tag, block in self._blocks.items():
            for i in range(block.count):
                mu = int(block.rows[i]) if block.rows is not None else -1
                nu = int(block.cols[i]) if block.cols is not None else -1
                if block.family.is_complex:
                    base = block.offset + 2 * i
                    records.append({'family': tag, 'mu': mu, 'nu': nu, 'kind': 're', 'offset': base})
                    records.append({'family': tag, 'mu': mu, 'nu': nu, 'kind': 'im', 'offset': base + 1})
                else:
                    records.append({'family': tag, 'mu': mu, 'nu': nu, 'kind': 'real',
                                    'offset': block.offset + i})
        return pd.DataFrame.from_records(records, columns=['family', 'mu', 'nu', 'kind', 'offset'])


def build_layout(order, l: int) -> StateLayout:
    return StateLayout(order, l)


def factorized_state(layout: StateLayout, a: complex, sm: Sequence[complex], sz: Sequence[float]) -> np.ndarray:
    """Состояние с нулевыми кумулянтами: когерентный резонатор и независимые спины"""
    sm = np.asarray(sm, dtype=complex).reshape(-1)
    sz = np.asarray(sz, dtype=complex).reshape(-1)
    if sm.size != layout.l or sz.size != layout.l:
        raise ContractViolation(f"Ожидалось {layout.l} кластеров, получено sm={sm.size}, sz={sz.size}")
    moments = close_third_order(factorize_second_order({'a': complex(a), 'sm': sm, 'sz': sz}))
    return layout.pack(moments)


def initial_state(layout: StateLayout, sz0) -> np.ndarray:
    """Пустой резонатор и невозбуждённые спины с заданной инверсией.

    Args:
        layout: Разметка вектора состояния
        sz0: ⟨σz⟩ каждого кластера (скаляр или массив) в [-1, 0]

    Returns:
        np.ndarray: Вектор состояния с факторизованными старшими моментами
    """
    sz0 = np.broadcast_to(np.asarray(sz0, dtype=float), (layout.l,))
    if np.any(sz0 < -1.0) or np.any(sz0 > 0.0) or not np.all(np.isfinite(sz0)):
        raise InvalidInitialStateError(f"Начальное ⟨σz⟩ должно лежать в [-1, 0]: {sz0}")
    return factorized_state(layout, 0.0, np.zeros(layout.l), sz0)


def observables(layout: StateLayout, y: np.ndarray) -> Dict[str, np.ndarray]:
    """⟨a⟩, |⟨a⟩|², ⟨a†a⟩ (|⟨a⟩|² для CE1) и ⟨σz_μ⟩"""
    a = complex(y[layout.offset_of('a')], y[layout.offset_of('a') + 1])
    sz_offset = layout.offset_of('sz', 0)
    sz = np.array(y[sz_offset:sz_offset + layout.l])
    if 'ada' in layout.tags:
        n_phot = float(y[layout.offset_of('ada')])
    else:
        n_phot = abs(a) ** 2
    return {'a': a, 'abs_a_sq': abs(a) ** 2, 'n_phot': n_phot, 'sz': sz}


def check_physical(layout: StateLayout, y: np.ndarray, tol: float, limit: float = 1e12) -> Optional[str]:
    """Имя нарушенной переменной или None"""
    if not np.all(np.isfinite(y)):
        return 'non-finite'
    if np.max(np.abs(y)) > limit:
        return 'divergence'
    sz_offset = layout.offset_of('sz', 0)
    sz = y[sz_offset:sz_offset + layout.l]
    if np.any(np.abs(sz) > 1.0 + tol):
        return f"sz[{int(np.argmax(np.abs(sz)))}]"
    sm_offset = layout.offset_of('sm', 0)
    sm = np.abs(y[sm_offset:sm_offset + 2 * layout.l:2] + 1j * y[sm_offset + 1:sm_offset + 2 * layout.l:2])
    if np.any(sm > 0.5 + tol):
        return f"sm[{int(np.argmax(sm))}]"
    return None


class MomentEquations:
    """Правая часть уравнений для заданного порядка разложения.

    Каждое семейство вычисляется своим методом `_d_<tag>`; вызов объекта
    как функции (t, y) -> dy/dt подходит для scipy.integrate.
    """

    def __init__(self, layout: StateLayout, params: PhysicalParams, ensemble: ClusterEnsemble,
                 source: Optional[MomentSource] = None):
        if ensemble.size != layout.l:
            raise ContractViolation(f"Разметка на {layout.l} кластеров, ансамбль из {ensemble.size}")
        self.layout = layout
        self.params = params
        self.ensemble = ensemble
        self.source = source if source is not None else CumulantClosure(ensemble)

        self.g = np.asarray(ensemble.g, dtype=float)
        self.weight = np.asarray(ensemble.weight, dtype=float)
        self.delta = np.asarray(ensemble.delta, dtype=float)
        self.mg = self.weight * self.g
        # w_ν(μ) g_ν для сумм по второму спину
        self.gw = (self.weight[None, :] - np.eye(layout.l)) * self.g[None, :]
        self.gk = self.g[:, None]
        self.gj = self.g[None, :]
        self.gamma_k = params.gamma_perp + 1j * self.delta
        self._equations: Dict[str, Callable] = {tag: getattr(self, f'_d_{tag}') for tag in layout.tags}

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.layout.pack(self.derivatives(self.layout.unpack(y)))

    def derivatives(self, moments: Dict[str, np.ndarray],
                    source: Optional[MomentSource] = None) -> Dict[str, np.ndarray]:
        """Производные всех отслеживаемых семейств (полные массивы)"""
        source = source if source is not None else self.source
        m = source.complete(moments, self.layout.order)
        if self.layout.order is CumulantOrder.CE3:
            m = dict(m)
            m['_fourth'] = source.fourth_order(m)
            m['_triples'] = source.spin_triple_sums(m)
        return {tag: equation(m) for tag, equation in self._equations.items()}

    def _wsum(self, x: np.ndarray) -> np.ndarray:
        """Σ_ν w_ν(μ) g_ν X[μ, ν]"""
        return np.sum(x * self.gw, axis=1)

    # --- первый порядок --------------------------------------------------

    def _d_a(self, m):
        p = self.params
        return -(p.kappa + 1j * p.delta_c) * m['a'] - 1j * np.sum(self.mg * m['sm']) + p.eta

    def _d_sm(self, m):
        return -self.gamma_k * m['sm'] + 1j * self.g * m['sza']

    def _d_sz(self, m):
        smad = m['smad']
        return -2.0 * self.params.gamma_h * (m['sz'] + 1.0) + 2j * self.g * (smad - np.conj(smad))

    # --- второй порядок --------------------------------------------------

    def _d_sza(self, m):
        p, g = self.params, self.g
        return (-(p.kappa + 2.0 * p.gamma_h + 1j * p.delta_c) * m['sza'] - 2.0 * p.gamma_h * m['a']
                + p.eta * m['sz'] - 1j * self._wsum(m['zm']) + 1j * g * m['sm']
                + 2j * g * (m['smada'] - np.conj(m['smadad'])))

    def _d_zm(self, m):
        p = self.params
        decay = 3.0 * p.gamma_h + 2.0 * p.gamma_p + 1j * self.delta[None, :]
        return (-decay * m['zm'] - 2.0 * p.gamma_h * m['sm'][None, :] + 1j * self.gj * m['zza']
                + 2j * self.gk * (m['mmad'] - m['pma']))

    def _d_smad(self, m):
        p, g = self.params, self.g
        return (-(p.kappa + self.gamma_k - 1j * p.delta_c) * m['smad'] + p.eta * m['sm']
                + 1j * self._wsum(m['pm'].T) + 0.5j * g * (m['sz'] + 1.0) + 1j * g * m['szada'])

    def _d_pm(self, m):
        p = self.params
        decay = 2.0 * p.gamma_h + 4.0 * p.gamma_p + 1j * (self.delta[None, :] - self.delta[:, None])
        zmad = m['zmad']
        return -decay * m['pm'] - 1j * self.gk * zmad + 1j * self.gj * np.conj(zmad.T)

    def _d_sma(self, m):
        p, g = self.params, self.g
        return (-(p.kappa + self.gamma_k + 1j * p.delta_c) * m['sma'] + p.eta * m['sm']
                - 1j * self._wsum(m['mm']) + 1j * g * m['szaa'])

    def _d_adad(self, m):
        p = self.params
        return (-2.0 * (p.kappa - 1j * p.delta_c) * m['adad'] + 2j * np.sum(self.mg * np.conj(m['sma']))
                + 2.0 * p.eta * np.conj(m['a']))

    def _d_ada(self, m):
        p = self.params
        smad = m['smad']
        return (-2.0 * p.kappa * m['ada'] - 1j * np.sum(self.mg * (smad - np.conj(smad)))
                + p.eta * (m['a'] + np.conj(m['a'])))

    def _d_zz(self, m):
        gh = self.params.gamma_h
        sz, zmad = m['sz'], m['zmad']
        return (-2.0 * gh * (sz[:, None] + sz[None, :] + 2.0 * m['zz'])
                + 2j * self.gk * (zmad.T - np.conj(zmad.T)) + 2j * self.gj * (zmad - np.conj(zmad)))

    def _d_mm(self, m):
        p = self.params
        decay = 2.0 * p.gamma_h + 4.0 * p.gamma_p + 1j * (self.delta[:, None] + self.delta[None, :])
        zma = m['zma']
        return -decay * m['mm'] + 1j * self.gk * zma + 1j * self.gj * zma.T

    # --- третий порядок --------------------------------------------------

    def _d_szada(self, m):
        p, g = self.params, self.g
        f1 = m['_fourth']['smadada']
        zmad = m['zmad']
        return (-2.0 * (p.kappa + p.gamma_h) * m['szada'] - 2.0 * p.gamma_h * m['ada']
                + p.eta * (m['sza'] + np.conj(m['sza'])) - 1j * self._wsum(zmad - np.conj(zmad))
                + 1j * g * (m['smad'] - np.conj(m['smad'])) + 2j * g * (f1 - np.conj(f1)))

    def _d_smada(self, m):
        p, g = self.params, self.g
        return (-(2.0 * p.kappa + self.gamma_k) * m['smada'] + p.eta * (m['smad'] + m['sma'])
                + 1j * g * m['_fourth']['szadaa'] + 1j * self._wsum(m['pma'].T - m['mmad'])
                + 0.5j * g * (m['sza'] + m['a']))

    def _d_smadad(self, m):
        p, g = self.params, self.g
        return (-(2.0 * p.kappa + self.gamma_k - 2j * p.delta_c) * m['smadad'] + 2.0 * p.eta * m['smad']
                + 2j * self._wsum(np.conj(m['pma'])) + 1j * g * (np.conj(m['sza']) + np.conj(m['a']))
                + 1j * g * np.conj(m['_fourth']['szadaa']))

    def _d_szaa(self, m):
        p, g = self.params, self.g
        fourth = m['_fourth']
        return (-2.0 * (p.kappa + p.gamma_h + 1j * p.delta_c) * m['szaa'] - 2.0 * p.gamma_h * np.conj(m['adad'])
                + 2.0 * p.eta * m['sza'] + 2j * g * m['sma'] - 2j * self._wsum(m['zma'])
                + 2j * g * (fourth['smadaa'] - np.conj(fourth['smadadad'])))

    def _d_smaa(self, m):
        p, g = self.params, self.g
        return (-(2.0 * p.kappa + self.gamma_k + 2j * p.delta_c) * m['smaa'] + 2.0 * p.eta * m['sma']
                - 2j * self._wsum(m['mma']) + 1j * g * m['_fourth']['szaaa'])

    def _d_adaa(self, m):
        p = self.params
        return (-(3.0 * p.kappa + 1j * p.delta_c) * m['adaa'] - 2j * np.sum(self.mg * m['smada'])
                + 1j * np.sum(self.mg * np.conj(m['smadad'])) + 2.0 * p.eta * m['ada']
                + p.eta * np.conj(m['adad']))

    def _d_aaa(self, m):
        p = self.params
        return (-3.0 * (p.kappa + 1j * p.delta_c) * m['aaa'] - 3j * np.sum(self.mg * m['smaa'])
                + 3.0 * p.eta * np.conj(m['adad']))

    def _d_zza(self, m):
        p = self.params
        gk, gj = self.gk, self.gj
        fourth = m['_fourth']
        p1, p2 = fourth['zmada'], fourth['zmadad']
        sza = m['sza']
        return (-(p.kappa + 1j * p.delta_c) * m['zza']
                - 2.0 * p.gamma_h * (sza[:, None] + sza[None, :] + 2.0 * m['zza'])
                + p.eta * m['zz']
                + 2j * (gk * p1.T + gj * p1 - gk * np.conj(p2.T) - gj * np.conj(p2))
                - 1j * m['_triples']['zz_sm'] + 1j * gk * m['zm'].T + 1j * gj * m['zm'])

    def _d_mmad(self, m):
        p = self.params
        gk, gj = self.gk, self.gj
        p1 = m['_fourth']['zmada']
        sm, zm = m['sm'], m['zm']
        decay = p.kappa + self.gamma_k[:, None] + self.gamma_k[None, :] - 1j * p.delta_c
        return (-decay * m['mmad'] + p.eta * m['mm'] + 1j * m['_triples']['sp_mm']
                + 0.5j * gk * (sm[None, :] + zm) + 0.5j * gj * (sm[:, None] + zm.T)
                + 1j * gk * p1 + 1j * gj * p1.T)

    def _d_pma(self, m):
        p = self.params
        gk, gj = self.gk, self.gj
        fourth = m['_fourth']
        decay = p.kappa + np.conj(self.gamma_k)[:, None] + self.gamma_k[None, :] + 1j * p.delta_c
        return (-decay * m['pma'] + p.eta * m['pm'] - 1j * m['_triples']['pm_sm']
                - 0.5j * gk * (m['sm'][None, :] + m['zm']) - 1j * gk * fourth['zmada']
                + 1j * gj * np.conj(fourth['zmadad'].T))

    def _d_zmad(self, m):
        p = self.params
        gk, gj = self.gk, self.gj
        fourth = m['_fourth']
        decay = p.kappa + 3.0 * p.gamma_h + 2.0 * p.gamma_p + 1j * (self.delta[None, :] - p.delta_c)
        return (-decay * m['zmad'] - 2.0 * p.gamma_h * m['smad'][None, :] + p.eta * m['zm']
                + 1j * m['_triples']['sp_zm'] - 1j * gk * m['pm']
                + 0.5j * gj * (m['sz'][:, None] + m['zz']) + 1j * gj * fourth['zzada']
                + 2j * gk * (fourth['mmadad'] - fourth['pmada']))

    def _d_zma(self, m):
        p = self.params
        gk, gj = self.gk, self.gj
        fourth = m['_fourth']
        decay = p.kappa + 3.0 * p.gamma_h + 2.0 * p.gamma_p + 1j * (self.delta[None, :] + p.delta_c)
        return (-decay * m['zma'] - 2.0 * p.gamma_h * m['sma'][None, :] + p.eta * m['zm']
                - 1j * m['_triples']['zm_sm'] + 1j * gk * m['mm'] + 1j * gj * fourth['zzaa']
                + 2j * gk * (fourth['mmada'] - fourth['pmaa']))

    def _d_mma(self, m):
        p = self.params
        p9 = m['_fourth']['zmaa']
        decay = p.kappa + self.gamma_k[:, None] + self.gamma_k[None, :] + 1j * p.delta_c
        return (-decay * m['mma'] + p.eta * m['mm'] - 1j * m['_triples']['mm_sm']
                + 1j * self.gk * p9 + 1j * self.gj * p9.T)


def rhs(layout: StateLayout, params: PhysicalParams, ensemble: ClusterEnsemble, state: np.ndarray) -> np.ndarray:
    """Производная вектора состояния (кумулянтное замыкание порядка разметки)"""
    layout.check(state)
    return MomentEquations(layout, params, ensemble)(0.0, state)
