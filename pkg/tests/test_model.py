import numpy as np
import pytest

from services.exceptions import InvalidGridError, InvalidParameterError
from services.model import (TWO_PI, ClusterEnsemble, CumulantOrder, PhysicalParams, cooperativity,
                            coupling_for_cooperativity, gaussian_ensemble, homogeneous_ensemble,
                            mhz_to_angular, saturation_photon_number, scale_ensemble)


def test_defaults_are_angular_units():
    params = PhysicalParams()
    assert params.kappa == pytest.approx(TWO_PI)
    assert params.gamma_h == pytest.approx(np.pi)
    assert params.gamma_perp == params.gamma_h
    assert PhysicalParams.from_mhz() == params


def test_gamma_perp_includes_dephasing():
    params = PhysicalParams.from_mhz(gamma_p_mhz=0.1)
    assert params.gamma_perp == pytest.approx(params.gamma_h + 2 * mhz_to_angular(0.1))


@pytest.mark.parametrize('field', ['kappa', 'gamma_h'])
def test_rates_must_be_positive(field):
    with pytest.raises(InvalidParameterError):
        PhysicalParams(**{field: 0.0})


def test_negative_drive_rejected():
    with pytest.raises(InvalidParameterError):
        PhysicalParams(eta=-1.0)


def test_order_parse():
    assert CumulantOrder.parse('CE2') is CumulantOrder.CE2
    assert CumulantOrder.CE3.rank == 3
    with pytest.raises(InvalidParameterError):
        CumulantOrder.parse('ce4')


def test_cooperativity_of_resonant_homogeneous_ensemble(params):
    n = 250
    g = coupling_for_cooperativity(14.0, n, params)
    assert cooperativity(homogeneous_ensemble(n, g), params) == pytest.approx(14.0, rel=1e-12)


def test_detuned_cluster_contributes_lorentzian_weight(params):
    ensemble = ClusterEnsemble(delta=[params.gamma_h], g=[1.0], weight=[10.0])
    expected = 10.0 / (params.kappa * params.gamma_h) / 2.0
    assert cooperativity(ensemble, params) == pytest.approx(expected)


def test_ensemble_arrays_are_read_only():
    ensemble = homogeneous_ensemble(10, 1.0)
    with pytest.raises(ValueError):
        ensemble.g[0] = 2.0


def test_ensemble_validation():
    with pytest.raises(InvalidGridError):
        ClusterEnsemble(delta=[1.0, 0.0], g=[1.0, 1.0], weight=[1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        ClusterEnsemble(delta=[0.0], g=[1.0, 2.0], weight=[1.0])
    with pytest.raises(InvalidParameterError):
        ClusterEnsemble(delta=[0.0], g=[1.0], weight=[-1.0])
    with pytest.raises(InvalidParameterError):
        ClusterEnsemble(delta=[0.0], g=[1.0], weight=[3.0], total_spins=4.0)


def test_saturation_photon_number():
    assert saturation_photon_number(2.0, 4.0) == pytest.approx(2.0)
    with pytest.raises(InvalidParameterError):
        saturation_photon_number(0.0, 1.0)


def test_scale_ensemble_preserves_cooperativity(params):
    n = 100
    base = homogeneous_ensemble(n, coupling_for_cooperativity(14.0, n, params))
    scaled, scaled_params = scale_ensemble(base, params.with_eta(3.0), 400)
    assert scaled.total_spins == pytest.approx(400)
    assert cooperativity(scaled, params) == pytest.approx(14.0, rel=1e-12)
    assert scaled_params.eta == pytest.approx(6.0)
    # n0 растёт пропорционально N, η/√n0 сохраняется
    n0_ratio = saturation_photon_number(scaled.g[0], params.gamma_h) / saturation_photon_number(base.g[0],
                                                                                                params.gamma_h)
    assert n0_ratio == pytest.approx(4.0)


def test_gaussian_grid_is_symmetric_and_normalized():
    ensemble = gaussian_ensemble(1000, 2.0, 11, 2.0, 1.0)
    assert ensemble.size == 11
    assert ensemble.delta[5] == 0.0
    np.testing.assert_array_equal(ensemble.delta, -ensemble.delta[::-1])
    np.testing.assert_allclose(ensemble.weight, ensemble.weight[::-1], rtol=1e-14)
    assert ensemble.weight.sum() == pytest.approx(1000, rel=1e-12)
    assert ensemble.delta[-1] == pytest.approx(4.0)


@pytest.mark.parametrize('l', [2, 1, 50])
def test_gaussian_requires_odd_cluster_count(l):
    with pytest.raises(InvalidGridError):
        gaussian_ensemble(100, 1.0, l, 2.0, 1.0)


@pytest.mark.parametrize('gamma_mhz, expected', [(1.0, 12.7), (0.5, 15.8), (0.1, 17.9)])
def test_broadened_cooperativity(params, gamma_mhz, expected):
    n = 1000
    g = coupling_for_cooperativity(18.0, n, params)
    ensemble = gaussian_ensemble(n, mhz_to_angular(gamma_mhz), 51, 2.0, g)
    assert cooperativity(ensemble, params) == pytest.approx(expected, abs=0.2)
