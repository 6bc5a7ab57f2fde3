import numpy as np
import pytest

from services.cumulant_eom import MomentEquations, build_layout, initial_state
from services.exceptions import (ContractViolation, DimensionMismatchError, InvalidParameterError,
                                 TruncationError)
from services.integrate import IntegratorConfig, evolve
from services.model import PhysicalParams, homogeneous_ensemble
from services.quantum_oracle import (HilbertConfig, closure_accuracy, evolve_density, expectation,
                                     liouvillian_apply, random_density, steady_state_density, verify_eom)


def _two_spins(params, cutoff=10):
    return HilbertConfig(n_spins=2, params=params.with_eta(1.3), deltas=(-0.8, 0.5), couplings=(1.1, 0.7),
                         photon_cutoff=cutoff)


def _three_spins(params, cutoff=10):
    # спины 1 и 2 образуют кластер с M=2
    return HilbertConfig(n_spins=3, params=params.with_eta(0.9), deltas=(-0.6, 0.4, 0.4),
                         couplings=(0.8, 1.2, 1.2), photon_cutoff=cutoff)


def test_config_limits(params):
    with pytest.raises(InvalidParameterError):
        HilbertConfig(n_spins=5, params=params, deltas=(0.0,) * 5, couplings=(1.0,) * 5)
    with pytest.raises(InvalidParameterError):
        HilbertConfig(n_spins=2, params=params, deltas=(0.0,), couplings=(1.0, 1.0))
    assert _two_spins(params).dim == 4 * 11


def test_liouvillian_preserves_trace_and_hermiticity(params, rng):
    config = _two_spins(params)
    rho = random_density(config, rng)
    drho = liouvillian_apply(config, rho)
    assert abs(np.trace(drho)) < 1e-10
    np.testing.assert_allclose(drho, drho.conj().T, atol=1e-10)


def test_expectation_contracts(params, rng):
    config = _two_spins(params)
    rho = random_density(config, rng)
    assert expectation(config, rho, 'id') == pytest.approx(1.0)
    assert expectation(config, rho, 'ad a').imag == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DimensionMismatchError):
        expectation(config, np.eye(3), 'a')
    with pytest.raises(ContractViolation):
        expectation(config, rho, 'sx0')
    with pytest.raises(ContractViolation):
        expectation(config, rho, 'sz2')


@pytest.mark.parametrize('order', ['ce1', 'ce2', 'ce3'])
def test_equations_match_exact_derivative_two_spins(params, rng, order):
    config = _two_spins(params)
    for _ in range(3):
        report = verify_eom(config, random_density(config, rng), order)
        assert report.max_residual < 1e-8
        # одиночные кластеры: диагональ парных семейств отсутствует
        assert bool(report.skipped) == (order != 'ce1')


def test_equations_match_exact_derivative_with_cluster(params, rng):
    config = _three_spins(params)
    clusters = [[0], [1, 2]]
    for _ in range(2):
        rho = random_density(config, rng, clusters)
        report = verify_eom(config, rho, 'ce3', clusters)
        assert report.max_residual < 1e-8
        pm = report.frame[report.frame['family'] == 'pm']
        assert ((pm['mu'] == 1) & (pm['nu'] == 1)).any()


@pytest.mark.parametrize('order', ['ce1', 'ce2', 'ce3'])
@pytest.mark.parametrize('gamma_p, delta_c', [(0.7, 0.0), (0.0, 1.3), (0.7, 1.3)])
def test_equations_match_with_dephasing_and_detuning(rng, order, gamma_p, delta_c):
    params = PhysicalParams(gamma_p=gamma_p, delta_c=delta_c)
    for config, clusters in ((_two_spins(params), [[0], [1]]), (_three_spins(params), [[0], [1, 2]])):
        rho = random_density(config, rng, clusters)
        assert verify_eom(config, rho, order, clusters).max_residual < 1e-8


def test_cluster_members_must_share_parameters(params, rng):
    config = _two_spins(params)
    with pytest.raises(ContractViolation):
        verify_eom(config, random_density(config, rng), 'ce2', [[0, 1]])


def test_truncation_is_detected():
    params = PhysicalParams(eta=25.0)
    config = HilbertConfig(n_spins=1, params=params, deltas=(0.0,), couplings=(0.5,), photon_cutoff=3)
    with pytest.raises(TruncationError) as error:
        steady_state_density(config)
    assert error.value.population > 1e-8


def test_exact_and_moment_dynamics_agree_without_coupling(params):
    eta = 1.0
    config = HilbertConfig(n_spins=1, params=params.with_eta(eta), deltas=(0.0,), couplings=(0.0,),
                           photon_cutoff=8)
    rho0 = np.zeros((config.dim, config.dim), dtype=complex)
    ground_vacuum = config.fock_dim
    rho0[ground_vacuum, ground_vacuum] = 1.0
    times = np.linspace(0.0, 0.5, 6)
    states = evolve_density(config, rho0, times)
    exact = np.array([expectation(config, rho, 'a') for rho in states])

    system = MomentEquations(build_layout('ce2', 1), params.with_eta(eta), homogeneous_ensemble(1, 0.0))
    frame = evolve(system, initial_state(system.layout, -1.0), IntegratorConfig(), times).frame
    np.testing.assert_allclose(frame['re_a'] + 1j * frame['im_a'], exact, atol=1e-7)


@pytest.mark.slow
@pytest.mark.parametrize('spins, clusters', [(2, [[0], [1]]), (3, [[0], [1, 2]])])
def test_hundred_random_states(params, spins, clusters):
    config = _two_spins(params) if spins == 2 else _three_spins(params)
    rng = np.random.default_rng(2024)
    for _ in range(100):
        rho = random_density(config, rng, clusters)
        for order in ('ce1', 'ce2', 'ce3'):
            assert verify_eom(config, rho, order, clusters).max_residual < 1e-8


@pytest.mark.slow
def test_closure_accuracy_report(params):
    result = closure_accuracy(params.with_eta(2.0), 1.0, n_spins=2, photon_cutoff=8)
    assert result['exact'] > 0
    for order in ('ce1', 'ce2', 'ce3'):
        assert np.isfinite(result[f'err_{order}'])
