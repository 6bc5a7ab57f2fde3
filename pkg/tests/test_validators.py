import pytest

from utils.validators import (validate_ensemble, validate_integrator, validate_params, validate_run_config,
                              validate_sweep)


def test_valid_run_config():
    data = {
        'params': {'kappa_mhz': 1.0, 'gamma_h_mhz': 0.5, 'gamma_p_mhz': 0.0},
        'ensemble': {'kind': 'gaussian', 'n': 1000, 'g_mhz': 0.02, 'gamma_mhz': 0.5, 'clusters': 51},
        'order': 'ce2',
        'integrator': {'rtol': 1e-9, 'max_time': None, 'method': 'RK45', 'polish': False},
        'sweep': {'eta_ratios': [0.95, 1.05], 'n_range': [10, 1e4], 'confirm_points': 3, 'seed': 'upper'},
        'workers': 2,
        'use_cache': True,
    }
    assert validate_run_config(data) == (True, None)


@pytest.mark.parametrize('data', [
    [],
    {'unknown': 1},
    {'order': 'ce4'},
    {'workers': 0},
    {'workers': True},
    {'output_dir': 5},
    {'use_cache': 'yes'},
])
def test_invalid_top_level(data):
    valid, error = validate_run_config(data)
    assert not valid
    assert error


def test_section_errors_are_prefixed():
    valid, error = validate_run_config({'params': {'kappa_mhz': -1}})
    assert not valid
    assert error.startswith("Ошибка в разделе params")


def test_params():
    assert validate_params({'kappa_mhz': 2.0})[0]
    assert not validate_params({'kappa': 2.0})[0]
    assert not validate_params({'gamma_h_mhz': 0})[0]
    assert not validate_params({'gamma_p_mhz': -0.1})[0]
    assert not validate_params({'delta_c_mhz': '1'})[0]


def test_ensemble_coupling_is_exclusive():
    assert validate_ensemble({'n': 100, 'cooperativity': 14})[0]
    assert not validate_ensemble({'n': 100})[0]
    assert not validate_ensemble({'n': 100, 'cooperativity': 14, 'g_mhz': 0.1})[0]


@pytest.mark.parametrize('section', [
    {'kind': 'lorentzian', 'cooperativity': 1},
    {'kind': 'homogeneous', 'cooperativity': 1, 'clusters': 51},
    {'kind': 'gaussian', 'cooperativity': 1, 'clusters': 50},
    {'kind': 'gaussian', 'cooperativity': 1, 'clusters': 1},
    {'kind': 'gaussian', 'cooperativity': 1, 'gamma_mhz': 0},
    {'n': -5, 'cooperativity': 1},
])
def test_invalid_ensemble(section):
    assert not validate_ensemble(section)[0]


def test_integrator():
    assert validate_integrator({'phys_tol': 0, 'window': 2.0})[0]
    assert not validate_integrator({'method': 'LSODA'})[0]
    assert not validate_integrator({'rtol': 0})[0]
    assert not validate_integrator({'polish': 1})[0]
    assert not validate_integrator({'steps': 10})[0]


@pytest.mark.parametrize('section', [
    {'eta_ratios': []},
    {'eta_ratios': [1.0, 'x']},
    {'times_us': [0.0, 2.0, 1.0]},
    {'sz0_grid': [-1.0, -0.2]},
    {'n_range': [100, 10]},
    {'n_range': [0, 10]},
    {'confirm_points': 1},
    {'points_per_decade': 0},
    {'delta_eps': 0},
    {'reference': 'middle'},
    {'seed': 'lower'},
    {'orders': ['ce1', 'ce5']},
    {'cluster_sizes': [1, 0]},
    {'eta_mhz': -1},
])
def test_invalid_sweep(section):
    assert not validate_sweep(section)[0]


def test_valid_sweep():
    assert validate_sweep({'times_us': [0.0, 0.0, 1.5], 'sz0_grid': [-1.0, -0.5], 'spins': 3,
                           'cluster_sizes': [1, 2], 'orders': ['ce3'], 'reference': 'minus'})[0]
