from itertools import combinations

import numpy as np
import pytest

from services.closures import (CumulantClosure, close3, close4, close_third_order, factorize_second_order,
                               pauli_reduce)
from services.cumulant_eom import build_layout, factorized_state
from services.model import ClusterEnsemble, CumulantOrder


def _partitions(items):
    """Все разбиения множества на непустые блоки"""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partition in _partitions(rest):
        for i in range(len(partition)):
            yield partition[:i] + [[first] + partition[i]] + partition[i + 1:]
        yield [[first]] + partition


def _moment_from_cumulants(cumulants, labels):
    total = 0.0
    for partition in _partitions(list(labels)):
        term = 1.0
        for block in partition:
            term *= cumulants[tuple(sorted(block))]
        total += term
    return total


def _random_cumulants(rng, labels, max_order):
    cumulants = {}
    for order in range(1, max_order + 1):
        for block in combinations(labels, order):
            cumulants[block] = complex(rng.normal(), rng.normal())
    return cumulants


def test_close3_drops_third_cumulant(rng):
    cumulants = _random_cumulants(rng, 'abc', 2)
    cumulants[('a', 'b', 'c')] = 0.0

    def m(*labels):
        return _moment_from_cumulants(cumulants, labels)

    value = close3(m('a'), m('b'), m('c'), m('a', 'b'), m('a', 'c'), m('b', 'c'))
    assert value == pytest.approx(m('a', 'b', 'c'), rel=1e-10)


def test_close4_drops_fourth_cumulant(rng):
    cumulants = _random_cumulants(rng, 'abcd', 3)
    cumulants[('a', 'b', 'c', 'd')] = 0.0

    def m(*labels):
        return _moment_from_cumulants(cumulants, labels)

    means = tuple(m(x) for x in 'abcd')
    pairs = tuple(m(*p) for p in ('ab', 'ac', 'ad', 'bc', 'bd', 'cd'))
    triples = tuple(m(*t) for t in ('bcd', 'acd', 'abd', 'abc'))
    assert close4(means, pairs, triples) == pytest.approx(m('a', 'b', 'c', 'd'), rel=1e-10)


def test_pauli_reduce():
    assert pauli_reduce(['sp', 'sm']) == {'id': 0.5, 'sz': 0.5}
    assert pauli_reduce(['sz', 'sz']) == {'id': 1.0}
    assert pauli_reduce(['sm', 'sm']) == {}
    assert pauli_reduce(['sm', 'sp', 'sm']) == {'sm': 1.0}
    with pytest.raises(ValueError):
        pauli_reduce(['sx'])


def test_factorized_moments_are_products():
    a = 0.3 - 0.2j
    sm = np.array([0.1 + 0.05j, -0.2j])
    sz = np.array([-0.8, -0.6])
    m = factorize_second_order({'a': a, 'sm': sm, 'sz': sz})
    assert m['ada'] == pytest.approx(abs(a) ** 2)
    np.testing.assert_allclose(m['pm'], np.outer(np.conj(sm), sm))
    third = close_third_order(m)
    np.testing.assert_allclose(third['zma'], np.outer(sz, sm) * a)
    assert third['aaa'] == pytest.approx(a ** 3)


def _product_state_moments(l, rng):
    a = complex(rng.normal(), rng.normal()) * 0.5
    sm = (rng.normal(size=l) + 1j * rng.normal(size=l)) * 0.2
    sz = -0.5 - 0.4 * rng.random(l)
    layout = build_layout(CumulantOrder.CE3, l)
    return layout.unpack(factorized_state(layout, a, sm, sz)), a, sm, sz


def test_fourth_order_of_product_state(rng):
    ensemble = ClusterEnsemble(delta=[-1.0, 0.0, 2.0], g=[1.0, 1.5, 0.5], weight=[3.0, 4.0, 2.0])
    m, a, sm, sz = _product_state_moments(3, rng)
    fourth = CumulantClosure(ensemble).fourth_order(m)
    ac = np.conj(a)
    assert fourth['smadada'] == pytest.approx(sm * ac * ac * a)
    np.testing.assert_allclose(fourth['zzada'], np.outer(sz, sz) * ac * a)
    np.testing.assert_allclose(fourth['pmaa'], np.outer(np.conj(sm), sm) * a * a)


def test_spin_triple_sums_of_product_state(rng):
    g = np.array([1.0, 1.5, 0.5])
    weight = np.array([3.0, 4.0, 2.0])
    ensemble = ClusterEnsemble(delta=[-1.0, 0.0, 2.0], g=g, weight=weight)
    m, a, sm, sz = _product_state_moments(3, rng)
    sums = CumulantClosure(ensemble).spin_triple_sums(m)
    # третий спин m ∉ {k, j}: вес M_ρ - δ_ρμ - δ_ρν
    for mu in range(3):
        for nu in range(3):
            w = weight - (np.arange(3) == mu) - (np.arange(3) == nu)
            rest = np.sum(w * g * sm)
            assert sums['zz_sm'][mu, nu] == pytest.approx(sz[mu] * sz[nu] * rest)
            assert sums['pm_sm'][mu, nu] == pytest.approx(np.conj(sm[mu]) * sm[nu] * rest)
            assert sums['sp_mm'][mu, nu] == pytest.approx(np.conj(rest) * sm[mu] * sm[nu])
            assert sums['mm_sm'][mu, nu] == pytest.approx(sm[mu] * sm[nu] * rest)


def test_complete_by_order(rng):
    ensemble = ClusterEnsemble(delta=[0.0], g=[1.0], weight=[5.0])
    closure = CumulantClosure(ensemble)
    m, *_ = _product_state_moments(1, rng)
    assert closure.complete(m, CumulantOrder.CE3) is m
    assert 'pm' in closure.complete({'a': m['a'], 'sm': m['sm'], 'sz': m['sz']}, 'ce1')
