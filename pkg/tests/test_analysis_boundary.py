import numpy as np
import pytest

from services import analysis_boundary
from services.analysis_boundary import (BoundaryTask, DeviationTriple, ScaledEnsembleFactory, StationaryResult,
                                        SweepSettings, boundary_frame, boundary_sweep, deviation_triple, n_grid,
                                        normalized_amplitude, normalized_scan, nsc_search, reference_drives,
                                        relative_deviation, transmission_scan)
from services.exceptions import (BoundaryNotFoundError, ContractViolation, InvalidGridError,
                                 InvalidParameterError, NoConvergenceError, NonStationaryError, StiffnessError,
                                 UndefinedNormalizationError)
from services.integrate import Outcome, OutcomeKind
from services.model import (CumulantOrder, coupling_for_cooperativity, cooperativity, gaussian_ensemble,
                            homogeneous_ensemble, mhz_to_angular)
from services.semiclassical import CriticalDrives, ensemble_critical_drives


def _factory(params, c=14.0, n=100, reference='plus'):
    base = homogeneous_ensemble(n, coupling_for_cooperativity(c, n, params))
    return ScaledEnsembleFactory(base, params, reference=reference)


def _fake_triples(monkeypatch, rule):
    def fake(params, ensemble, eta, settings=None, eta_ratio=None):
        return rule(int(round(ensemble.total_spins)))
    monkeypatch.setattr(analysis_boundary, 'deviation_triple', fake)


def test_relative_deviation():
    assert relative_deviation(1.1, 1.0) == pytest.approx(0.1)
    assert relative_deviation(0.9, 1.0) == pytest.approx(0.1)
    assert relative_deviation(0.0, 0.0) == 0.0
    assert relative_deviation(1.0, 0.0) == float('inf')


def test_normalized_amplitude():
    assert normalized_amplitude(2.0, 4.0) == 0.5
    with pytest.raises(UndefinedNormalizationError):
        normalized_amplitude(1.0, 0.0)


def test_deviation_triple():
    triple = DeviationTriple.from_amplitudes(1.0, 1.02, 1.01)
    assert triple.d12 == pytest.approx(0.02 / 1.02)
    assert triple.d13 == pytest.approx(0.01 / 1.01)
    assert triple.largest() == triple.d12
    assert triple.below(0.05)
    assert not triple.below(0.015)


def test_n_grid():
    np.testing.assert_array_equal(n_grid((10, 100), 4), [10, 18, 32, 56, 100])
    with pytest.raises(InvalidGridError):
        n_grid((100, 10), 4)
    with pytest.raises(InvalidGridError):
        n_grid((10, 100), 0)


def test_settings_reject_unknown_seed():
    with pytest.raises(InvalidParameterError):
        SweepSettings(seed='middle')


def test_reference_drives_closed_form(params):
    factory = _factory(params)
    numeric = ensemble_critical_drives(factory.base, params)
    assert factory.drives.eta_plus == pytest.approx(numeric.eta_plus, rel=1e-8)
    assert factory.eta_crit == factory.drives.eta_plus
    assert _factory(params, reference='minus').eta_crit == pytest.approx(numeric.eta_minus, rel=1e-8)
    with pytest.raises(InvalidParameterError):
        _factory(params, reference='middle')
    assert reference_drives(factory.base, params).bistable


def test_factory_preserves_cooperativity(params):
    factory = _factory(params)
    ensemble, scaled = factory(400, 1.05)
    assert cooperativity(ensemble, params) == pytest.approx(14.0, rel=1e-12)
    assert factory.cooperativity == pytest.approx(14.0, rel=1e-12)
    assert scaled.eta == pytest.approx(1.05 * factory.eta_crit * 2.0)


def test_nsc_search_refines_to_integer(params, monkeypatch):
    _fake_triples(monkeypatch, lambda n: DeviationTriple(5.0 / n, 1.0 / n, 5.0 / n))
    point = nsc_search(_factory(params), 1.05, delta_eps=1e-2, n_range=(10, 1e5), confirm_points=3)
    assert point.n_sc == 501
    assert point.status == 'ok'
    assert point.deviations.d12 == pytest.approx(5.0 / 501)
    assert [row['n'] for row in point.trace] == sorted(row['n'] for row in point.trace)


def test_nsc_search_requires_confirmation(params, monkeypatch):
    grid = n_grid((10, 1e4), 4)
    isolated = int(grid[3])

    def rule(n):
        small = n == isolated or n >= 3000
        return DeviationTriple(1e-4, 1e-4, 1e-4) if small else DeviationTriple(0.5, 0.5, 0.5)
    _fake_triples(monkeypatch, rule)
    point = nsc_search(_factory(params), 1.05, n_range=(10, 1e4), confirm_points=2, points_per_decade=4)
    assert point.n_sc == 3000


def test_nsc_search_without_refinement(params, monkeypatch):
    _fake_triples(monkeypatch, lambda n: DeviationTriple(5.0 / n, 0.0, 0.0))
    point = nsc_search(_factory(params), 1.05, n_range=(10, 1e4), points_per_decade=4, refine=False)
    assert point.n_sc in n_grid((10, 1e4), 4)
    assert point.n_sc >= 501


def test_nsc_search_records_nonstationary_points(params, monkeypatch):
    def rule(n):
        if n < 100:
            raise NonStationaryError("no steady state", order='ce3',
                                     outcome=Outcome(OutcomeKind.LIMIT_CYCLE, 10.0))
        return DeviationTriple(0.0, 0.0, 0.0)
    _fake_triples(monkeypatch, rule)
    point = nsc_search(_factory(params), 1.05, n_range=(10, 1e3), points_per_decade=2, refine=False)
    assert point.n_sc == 100
    statuses = {row['n']: row['status'] for row in point.trace}
    assert statuses[10] == 'nonstationary:ce3:limit_cycle'


def _fake_amplitudes(monkeypatch, rule):
    def fake(order, params, ensemble, settings=None, eta_ratio=None):
        rule(order, int(round(ensemble.total_spins)))
        return StationaryResult(order, 1.0, Outcome(OutcomeKind.STATIONARY, 1.0, amplitude=1.0), -1.0)
    monkeypatch.setattr(analysis_boundary, 'stationary_amplitude', fake)


@pytest.mark.parametrize('error', [StiffnessError("шаг слишком мал", time=3.0),
                                   NoConvergenceError("нет корня", residual=0.1)])
def test_deviation_triple_reports_integration_failure(params, monkeypatch, error):
    def rule(order, n):
        if order is CumulantOrder.CE3:
            raise error
    _fake_amplitudes(monkeypatch, rule)
    ensemble, scaled = _factory(params)(100, 1.05)
    with pytest.raises(NonStationaryError) as failure:
        deviation_triple(scaled, ensemble, scaled.eta)
    assert failure.value.order == 'ce3'
    assert failure.value.outcome is None
    assert failure.value.reason == type(error).__name__


def test_nsc_search_continues_past_failed_n(params, monkeypatch):
    def rule(order, n):
        if n == 10:
            raise StiffnessError("шаг слишком мал", time=3.0)
    _fake_amplitudes(monkeypatch, rule)
    point = nsc_search(_factory(params), 1.05, n_range=(10, 1e3), points_per_decade=2, refine=False)
    assert point.n_sc == 32
    statuses = {row['n']: row['status'] for row in point.trace}
    assert statuses[10] == 'nonstationary:ce1:StiffnessError'
    assert statuses[32] == 'ok'


def test_nsc_search_not_found(params, monkeypatch):
    _fake_triples(monkeypatch, lambda n: DeviationTriple(0.5, 0.5, 0.5))
    with pytest.raises(BoundaryNotFoundError) as error:
        nsc_search(_factory(params), 0.95, n_range=(10, 1e3), points_per_decade=2)
    assert len(error.value.trace) == len(n_grid((10, 1e3), 2))


def test_nsc_search_contract(params):
    with pytest.raises(ContractViolation):
        nsc_search(_factory(params), 1.05, confirm_points=1)
    with pytest.raises(InvalidParameterError):
        nsc_search(_factory(params), 1.05, delta_eps=0.0)


def test_boundary_sweep_validates_ratios(params):
    factory = _factory(params)
    with pytest.raises(InvalidGridError):
        boundary_sweep([BoundaryTask(factory, 1.0, 'C=14')])
    with pytest.raises(InvalidGridError):
        boundary_sweep([BoundaryTask(factory, -0.5, 'C=14')])


def test_boundary_sweep_marks_missing_points(params, monkeypatch):
    _fake_triples(monkeypatch, lambda n: DeviationTriple(5.0 / n, 0.0, 0.0))
    factory = _factory(params)
    tasks = [BoundaryTask(factory, 1.05, 'C=14', n_range=(10, 1e4)),
             BoundaryTask(factory, 0.95, 'C=14', n_range=(10, 100))]
    points = boundary_sweep(tasks)
    assert points[0].n_sc == 501
    assert points[1].status == 'not_found'
    frame = boundary_frame(points)
    assert list(frame.columns) == ['c', 'eta_over_etacrit', 'n_sc', 'd12', 'd23', 'd13', 'status']
    assert np.isnan(frame.loc[1, 'n_sc'])
    assert 'gamma_mhz' in boundary_frame(points, by_gamma=True).columns


def test_decoupled_spins_pass_immediately(params):
    base = homogeneous_ensemble(10, 0.0)
    drives = CriticalDrives(eta_minus=2.0, eta_plus=2.0, x_at_eta_minus=0.1, x_at_eta_plus=0.1, bistable=False)
    factory = ScaledEnsembleFactory(base, params, drives=drives)
    point = nsc_search(factory, 1.5, n_range=(10, 1000), confirm_points=2, points_per_decade=2)
    assert point.n_sc == 10
    assert point.deviations.largest() < 1e-8


def test_ce1_scan_matches_semiclassical(params):
    frame = transmission_scan(_factory(params), [100, 1000], [0.5], ['ce1'])
    assert list(frame['n']) == [100.0, 1000.0]
    assert (frame['outcome'] == 'stationary').all()
    np.testing.assert_allclose(frame['normalized'], 1.0, rtol=1e-6)
    # |a|²/N не зависит от N при фиксированной C
    ratio = frame['abs_a_sq'] / frame['n']
    assert ratio[1] == pytest.approx(ratio[0], rel=1e-6)


def test_normalized_scan_labels(params):
    factories = [_factory(params, c=5.0), _factory(params, c=14.0)]
    frame = normalized_scan(factories, [50], 0.5, ['ce1'])
    assert list(frame['c']) == [5.0, 14.0]
    np.testing.assert_allclose(frame['normalized'], 1.0, rtol=1e-6)
    with pytest.raises(InvalidGridError):
        normalized_scan([], [50], 0.5, ['ce1'])


def test_scan_is_independent_of_worker_count(params):
    factory = _factory(params)
    serial = transmission_scan(factory, [100, 300], [0.5, 0.8], ['ce1'], workers=1)
    parallel = transmission_scan(factory, [100, 300], [0.5, 0.8], ['ce1'], workers=2)
    assert serial.equals(parallel)


@pytest.mark.slow
def test_ce2_jumps_near_45_spins(params):
    frame = normalized_scan([_factory(params)], [35, 55], 1.05, ['ce2'])
    low, high = frame['normalized']
    assert low < 0.5
    assert high > 0.5


@pytest.mark.slow
def test_deviation_decays_as_inverse_n(params):
    factory = _factory(params)
    values = []
    for n in (300, 3000):
        ensemble, scaled = factory(n, 1.05)
        values.append(deviation_triple(scaled, ensemble, scaled.eta, eta_ratio=1.05).d12)
    slope = np.log10(values[1] / values[0])
    assert slope == pytest.approx(-1.0, abs=0.1)


@pytest.mark.slow
@pytest.mark.parametrize('eta_ratio, n_expected', [(1.01, 500), (0.99, 3e4)])
def test_nsc_anchors_near_critical_drive(params, eta_ratio, n_expected):
    point = nsc_search(_factory(params, c=18.0), eta_ratio, n_range=(10, 1e5))
    assert n_expected / 1.5 <= point.n_sc <= n_expected * 1.5


@pytest.mark.slow
def test_boundary_tendencies(params):
    cs = (10.0, 14.0, 18.0)
    below = [nsc_search(_factory(params, c=c), 0.95, n_range=(10, 1e5)).n_sc for c in cs]
    above = [nsc_search(_factory(params, c=c), 1.05, n_range=(10, 1e5)).n_sc for c in cs]
    assert below[0] < below[1] < below[2]
    assert above[0] > above[1] > above[2]
    c5 = _factory(params, c=5.0)
    assert nsc_search(c5, 1.05, n_range=(10, 1e5)).n_sc > nsc_search(c5, 0.95, n_range=(10, 1e5)).n_sc


@pytest.mark.slow
def test_broadened_rows_follow_effective_cooperativity(params):
    # C убывает с ростом Γ: 17.9, 15.8, 12.7 при g, дающей C = 18 без уширения
    n = 1000
    g = coupling_for_cooperativity(18.0, n, params)
    factories = [ScaledEnsembleFactory(gaussian_ensemble(n, mhz_to_angular(gamma), 51, 2.0, g), params)
                 for gamma in (0.1, 0.5, 1.0)]
    assert [f.cooperativity for f in factories] == sorted((f.cooperativity for f in factories), reverse=True)
    below = [nsc_search(f, 0.95, n_range=(10, 1e5)).n_sc for f in factories]
    above = [nsc_search(f, 1.05, n_range=(10, 1e5)).n_sc for f in factories]
    assert below[0] > below[1] > below[2]
    assert above[0] < above[1] < above[2]
