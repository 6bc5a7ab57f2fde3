"""Замыкание иерархии моментов.

Правая часть уравнений (services/cumulant_eom.py) берёт недостающие
моменты у источника: CumulantClosure строит их из отслеживаемых моментов
через кумулянтное разложение, ExactMoments (services/quantum_oracle.py)
вычисляет их по матрице плотности.

Обозначения ключей: 'sm' σ⁻, 'sz' σz, 'a' a, 'ad' a†. Двухспиновые
семейства: 'zm' ⟨σz_μ σ⁻_ν⟩, 'pm' ⟨σ⁺_μ σ⁻_ν⟩, 'zz', 'mm' ⟨σ⁻_μ σ⁻_ν⟩.
"""
import logging
from typing import Dict, Sequence

import numpy as np

from services.model import ClusterEnsemble, CumulantOrder

logger = logging.getLogger(__name__)

# Моменты четвёртого порядка, нужные уравнениям CE3. Шаблон операторов
# с индексами кластеров {k}, {j}; арность 1: вектор по μ, 2: матрица [μ, ν].
FOURTH_ORDER_TERMS = {
    'smadada': ('sm{k} ad ad a', 1),
    'szadaa': ('sz{k} ad a a', 1),
    'smadaa': ('sm{k} ad a a', 1),
    'smadadad': ('sm{k} ad ad ad', 1),
    'szaaa': ('sz{k} a a a', 1),
    'zmada': ('sz{k} sm{j} ad a', 2),
    'zmadad': ('sz{k} sm{j} ad ad', 2),
    'zzada': ('sz{k} sz{j} ad a', 2),
    'mmadad': ('sm{k} sm{j} ad ad', 2),
    'pmada': ('sp{k} sm{j} ad a', 2),
    'zzaa': ('sz{k} sz{j} a a', 2),
    'mmada': ('sm{k} sm{j} ad a', 2),
    'pmaa': ('sp{k} sm{j} a a', 2),
    'zmaa': ('sz{k} sm{j} a a', 2),
}

# Суммы Σ_m g_m ⟨...⟩ по третьему спину m ∉ {k, j} с весами кратностей.
SPIN_TRIPLE_TERMS = {
    'zz_sm': 'sz{k} sz{j} sm{m}',
    'sp_mm': 'sp{m} sm{k} sm{j}',
    'pm_sm': 'sp{k} sm{j} sm{m}',
    'sp_zm': 'sp{m} sz{k} sm{j}',
    'zm_sm': 'sz{k} sm{j} sm{m}',
    'mm_sm': 'sm{k} sm{j} sm{m}',
}

# Произведения операторов одного спина: σ⁺σ⁻ = (1+σz)/2, σ⁻σ⁺ = (1-σz)/2, ...
_PAULI_PRODUCTS = {
    ('sz', 'sz'): {'id': 1.0},
    ('sz', 'sm'): {'sm': -1.0},
    ('sm', 'sz'): {'sm': 1.0},
    ('sz', 'sp'): {'sp': 1.0},
    ('sp', 'sz'): {'sp': -1.0},
    ('sp', 'sm'): {'id': 0.5, 'sz': 0.5},
    ('sm', 'sp'): {'id': 0.5, 'sz': -0.5},
    ('sp', 'sp'): {},
    ('sm', 'sm'): {},
}


def pauli_reduce(operators: Sequence[str]) -> Dict[str, complex]:
    """Сводит произведение операторов одного спина к линейной комбинации {id, sz, sp, sm}.

    Args:
        operators: Последовательность из 'id', 'sz', 'sp', 'sm' в порядке умножения

    Returns:
        Dict[str, complex]: Коэффициенты при базисных операторах (нулевые опущены)
    """
    result = {'id': 1.0 + 0j}
    for op in operators:
        if op not in ('id', 'sz', 'sp', 'sm'):
            raise ValueError(f"Неизвестный спиновый оператор: {op}")
        if op == 'id':
            continue
        product = {}
        for base, coeff in result.items():
            terms = {op: 1.0} if base == 'id' else _PAULI_PRODUCTS[(base, op)]
            for name, value in terms.items():
                product[name] = product.get(name, 0.0) + coeff * value
        result = {name: value for name, value in product.items() if value != 0}
    return result


def close3(a, b, c, ab, ac, bc):
    """⟨ABC⟩ при нулевом кумулянте третьего порядка"""
    return ab * c + ac * b + bc * a - 2.0 * a * b * c


def close4(means, pairs, triples):
    """⟨ABCD⟩ при нулевом кумулянте четвёртого порядка.

    means = (A, B, C, D), pairs = (AB, AC, AD, BC, BD, CD),
    triples = (BCD, ACD, ABD, ABC).
    """
    a, b, c, d = means
    ab, ac, ad, bc, bd, cd = pairs
    bcd, acd, abd, abc = triples
    return (a * bcd + b * acd + c * abd + d * abc
            + ab * cd + ac * bd + ad * bc
            - 2.0 * (ab * c * d + ac * b * d + ad * b * c + bc * a * d + bd * a * c + cd * a * b)
            + 6.0 * a * b * c * d)


def _col(v):
    return np.asarray(v)[:, None]


def _row(v):
    return np.asarray(v)[None, :]


def factorize_second_order(m: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Моменты второго порядка произведения состояний (CE1)"""
    a, s, z = m['a'], m['sm'], m['sz']
    ac = np.conj(a)
    out = dict(m)
    out.update({
        'sza': z * a, 'smad': s * ac, 'sma': s * a,
        'adad': ac * ac, 'ada': ac * a,
        'zm': _col(z) * _row(s), 'pm': _col(np.conj(s)) * _row(s),
        'zz': _col(z) * _row(z), 'mm': _col(s) * _row(s),
    })
    return out


def close_third_order(m: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Моменты третьего порядка через моменты не выше второго (CE2)"""
    a, s, z = m['a'], m['sm'], m['sz']
    ac = np.conj(a)
    sza, smad, sma = m['sza'], m['smad'], m['sma']
    adad, ada = m['adad'], m['ada']
    aa = np.conj(adad)
    zm, pm, zz, mm = m['zm'], m['pm'], m['zz'], m['mm']
    out = dict(m)
    out.update({
        'szada': close3(z, ac, a, np.conj(sza), sza, ada),
        'smada': close3(s, ac, a, smad, sma, ada),
        'smadad': close3(s, ac, ac, smad, smad, adad),
        'szaa': close3(z, a, a, sza, sza, aa),
        'smaa': close3(s, a, a, sma, sma, aa),
        'adaa': close3(ac, a, a, ada, ada, aa),
        'aaa': close3(a, a, a, aa, aa, aa),
        'zza': close3(_col(z), _row(z), a, zz, _col(sza), _row(sza)),
        'mmad': close3(_col(s), _row(s), ac, mm, _col(smad), _row(smad)),
        'pma': close3(_col(np.conj(s)), _row(s), a, pm, _col(np.conj(smad)), _row(sma)),
        'zmad': close3(_col(z), _row(s), ac, zm, _col(np.conj(sza)), _row(smad)),
        'zma': close3(_col(z), _row(s), a, zm, _col(sza), _row(sma)),
        'mma': close3(_col(s), _row(s), a, mm, _col(sma), _row(sma)),
    })
    return out


class MomentSource:
    """Поставщик моментов, которые не входят в вектор состояния"""

    def complete(self, moments: Dict[str, np.ndarray], order: CumulantOrder) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    def fourth_order(self, moments: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        raise NotImplementedError

    def spin_triple_sums(self, moments: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        raise NotImplementedError


class CumulantClosure(MomentSource):
    """Кумулянтное замыкание для кластерного ансамбля.

    Суммы по третьему спину вычисляются через коллективные суммы,
    поэтому стоимость O(L²) на вычисление правой части.
    """

    def __init__(self, ensemble: ClusterEnsemble):
        self.g = np.asarray(ensemble.g, dtype=float)
        self.weight = np.asarray(ensemble.weight, dtype=float)
        self.mg = self.weight * self.g

    def complete(self, moments, order):
        order = CumulantOrder.parse(order)
        if order is CumulantOrder.CE1:
            return factorize_second_order(moments)
        if order is CumulantOrder.CE2:
            return close_third_order(moments)
        return moments

    def fourth_order(self, m):
        a, s, z = m['a'], m['sm'], m['sz']
        ac = np.conj(a)
        sc = np.conj(s)
        sza, smad, sma = m['sza'], m['smad'], m['sma']
        adad, ada = m['adad'], m['ada']
        aa = np.conj(adad)
        szada, smada, smadad = m['szada'], m['smada'], m['smadad']
        szaa, smaa, adaa, aaa = m['szaa'], m['smaa'], m['adaa'], m['aaa']
        zm, pm, zz, mm = m['zm'], m['pm'], m['zz'], m['mm']
        zza, mmad, pma, zmad, zma, mma = m['zza'], m['mmad'], m['pma'], m['zmad'], m['zma'], m['mma']
        c, r = _col, _row
        return {
            'smadada': close4((s, ac, ac, a), (smad, smad, sma, adad, ada, ada),
                              (np.conj(adaa), smada, smada, smadad)),
            'szadaa': close4((z, ac, a, a), (np.conj(sza), sza, sza, ada, ada, aa),
                             (adaa, szaa, szada, szada)),
            'smadaa': close4((s, ac, a, a), (smad, sma, sma, ada, ada, aa),
                             (adaa, smaa, smada, smada)),
            'smadadad': close4((s, ac, ac, ac), (smad, smad, smad, adad, adad, adad),
                               (np.conj(aaa), smadad, smadad, smadad)),
            'szaaa': close4((z, a, a, a), (sza, sza, sza, aa, aa, aa), (aaa, szaa, szaa, szaa)),
            'zmada': close4((c(z), r(s), ac, a),
                            (zm, c(np.conj(sza)), c(sza), r(smad), r(sma), ada),
                            (r(smada), c(szada), zma, zmad)),
            'zmadad': close4((c(z), r(s), ac, ac),
                             (zm, c(np.conj(sza)), c(np.conj(sza)), r(smad), r(smad), adad),
                             (r(smadad), c(np.conj(szaa)), zmad, zmad)),
            'zzada': close4((c(z), r(z), ac, a),
                            (zz, c(np.conj(sza)), c(sza), r(np.conj(sza)), r(sza), ada),
                            (r(szada), c(szada), zza, np.conj(zza))),
            'mmadad': close4((c(s), r(s), ac, ac),
                             (mm, c(smad), c(smad), r(smad), r(smad), adad),
                             (r(smadad), c(smadad), mmad, mmad)),
            'pmada': close4((c(sc), r(s), ac, a),
                            (pm, c(np.conj(sma)), c(np.conj(smad)), r(smad), r(sma), ada),
                            (r(smada), c(np.conj(smada)), pma, np.conj(pma.T))),
            'zzaa': close4((c(z), r(z), a, a),
                           (zz, c(sza), c(sza), r(sza), r(sza), aa),
                           (r(szaa), c(szaa), zza, zza)),
            'mmada': close4((c(s), r(s), ac, a),
                            (mm, c(smad), c(sma), r(smad), r(sma), ada),
                            (r(smada), c(smada), mma, mmad)),
            'pmaa': close4((c(sc), r(s), a, a),
                           (pm, c(np.conj(smad)), c(np.conj(smad)), r(sma), r(sma), aa),
                           (r(smaa), c(np.conj(smadad)), pma, pma)),
            'zmaa': close4((c(z), r(s), a, a),
                           (zm, c(sza), c(sza), r(sma), r(sma), aa),
                           (r(smaa), c(szaa), zma, zma)),
        }

    def spin_triple_sums(self, m):
        s, z = m['sm'], m['sz']
        sc = np.conj(s)
        zm, pm, zz, mm = m['zm'], m['pm'], m['zz'], m['mm']
        g, mg = self.g, self.mg
        gk, gj = _col(g), _row(g)

        # Σ_ρ w_ρ g_ρ X_ρ, где w_ρ = M_ρ - δ_ρμ - δ_ρν
        total = np.sum(mg * s)
        rest = total - gk * _col(s) - gj * _row(s)
        zm_sum = np.sum(zm * mg[None, :], axis=1)
        pm_cols = np.sum(pm * mg[:, None], axis=0)
        pm_rows = np.sum(pm * mg[None, :], axis=1)
        mm_sum = np.sum(mm * mg[None, :], axis=1)
        diag_zm = np.diag(zm)
        diag_pm = np.diag(pm)
        diag_mm = np.diag(mm)
        # Σ_ρ w_ρ g_ρ ⟨σz_μ σ⁻_ρ⟩ и ⟨σz_ν σ⁻_ρ⟩
        zs_k = _col(zm_sum) - gk * _col(diag_zm) - gj * zm
        zs_j = _row(zm_sum) - gk * zm.T - gj * _row(diag_zm)
        # Σ_ρ w_ρ g_ρ ⟨σ⁺_ρ σ⁻_μ⟩ и ⟨σ⁺_ρ σ⁻_ν⟩
        ps_k = _col(pm_cols) - gk * _col(diag_pm) - gj * pm.T
        ps_j = _row(pm_cols) - gk * pm - gj * _row(diag_pm)
        # Σ_ρ w_ρ g_ρ ⟨σ⁺_μ σ⁻_ρ⟩
        pr_k = _col(pm_rows) - gk * _col(diag_pm) - gj * pm
        # Σ_ρ w_ρ g_ρ ⟨σ⁻_μ σ⁻_ρ⟩ и ⟨σ⁻_ν σ⁻_ρ⟩
        ms_k = _col(mm_sum) - gk * _col(diag_mm) - gj * mm
        ms_j = _row(mm_sum) - gk * mm.T - gj * _row(diag_mm)

        zk, zj = _col(z), _row(z)
        sk, sj = _col(s), _row(s)
        sck = _col(sc)
        rest_c = np.conj(rest)
        return {
            'zz_sm': zz * rest + zs_k * zj + zs_j * zk - 2.0 * zk * zj * rest,
            'sp_mm': ps_k * sj + ps_j * sk + mm * rest_c - 2.0 * rest_c * sk * sj,
            'pm_sm': pm * rest + pr_k * sj + ms_j * sck - 2.0 * sck * sj * rest,
            'sp_zm': np.conj(zs_k) * sj + ps_j * zk + zm * rest_c - 2.0 * rest_c * zk * sj,
            'zm_sm': zm * rest + zs_k * sj + ms_j * zk - 2.0 * zk * sj * rest,
            'mm_sm': mm * rest + ms_k * sj + ms_j * sk - 2.0 * sk * sj * rest,
        }
