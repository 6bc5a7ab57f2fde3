import numpy as np
import pytest

from services.exceptions import InvalidGridError, InvalidParameterError
from services.model import (coupling_for_cooperativity, gaussian_ensemble, homogeneous_ensemble,
                            mhz_to_angular, saturation_photon_number)
from services.semiclassical import (LOWER, MIDDLE, UPPER, critical_drives, ensemble_critical_drives,
                                    homogeneous_steady_states, inhom_steady_state, inhom_steady_states,
                                    is_bistable, mean_field_moments, semiclassical_curve)


def _reduced(x, c, n0, eta, kappa):
    return x * (1 + c / (1 + x / n0)) ** 2 - (eta / kappa) ** 2


def test_bistability_threshold():
    assert not is_bistable(8.0)
    assert is_bistable(np.nextafter(8.0, 9.0))
    assert not is_bistable(0.0)
    with pytest.raises(InvalidParameterError):
        is_bistable(-1.0)


def test_critical_drives_c14():
    drives = critical_drives(14.0, 1.0, 1.0)
    assert drives.bistable
    assert drives.eta_plus == pytest.approx(8.0855, rel=1e-4)
    assert drives.eta_minus == pytest.approx(7.1852, rel=1e-4)
    assert drives.x_at_eta_plus == pytest.approx(6 - np.sqrt(21), rel=1e-12)
    assert drives.x_at_eta_minus == pytest.approx(6 + np.sqrt(21), rel=1e-12)


def test_turning_points_merge_at_c8():
    n0, kappa = 2.5, 3.0
    drives = critical_drives(8.0, n0, kappa)
    assert not drives.bistable
    assert drives.x_at_eta_plus == pytest.approx(3 * n0)
    assert drives.eta_plus == pytest.approx(kappa * np.sqrt(27 * n0))
    roots = homogeneous_steady_states(8.0, n0, drives.eta_plus, kappa)
    assert len(roots) == 1
    assert abs(_reduced(roots[0].x, 8.0, n0, drives.eta_plus, kappa)) < 1e-9


def _inflection(c):
    # d²η/dx² = 0: u³ + (3-3C)u² + (3+6C)u + (1+C) = 0, меньший положительный корень
    roots = np.roots([1.0, 3.0 - 3.0 * c, 3.0 + 6.0 * c, 1.0 + c])
    return min(r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0)


@pytest.mark.parametrize('c, eta_star', [(5.0, 4.0685), (6.5, 4.5662), (7.8, 5.1098)])
def test_monostable_max_slope(c, eta_star):
    drives = critical_drives(c, 1.0, 1.0)
    assert not drives.bistable
    assert drives.eta_plus == drives.eta_minus
    assert drives.x_at_eta_plus == pytest.approx(_inflection(c), rel=1e-6)
    assert drives.eta_plus == pytest.approx(eta_star, rel=1e-4)

    u = np.linspace(0.5, 7.0, 200001)
    eta = np.sqrt(u) * (1 + c / (1 + u))
    slope = np.gradient(u) / np.gradient(eta)
    assert u[np.argmax(slope)] == pytest.approx(drives.x_at_eta_plus, rel=1e-3)


def test_monostable_without_slope_maximum():
    # dx/dη растёт монотонно, берётся максимум d ln x / d ln η при u = √(1+C)
    drives = critical_drives(4.0, 1.0, 1.0)
    assert drives.eta_plus == drives.eta_minus
    assert drives.x_at_eta_plus == pytest.approx(np.sqrt(5.0), rel=1e-12)


def test_monostable_branch_labels_split_at_max_slope():
    drives = critical_drives(5.0, 1.0, 1.0)
    below = homogeneous_steady_states(5.0, 1.0, 0.999 * drives.eta_plus, 1.0)
    above = homogeneous_steady_states(5.0, 1.0, 1.001 * drives.eta_plus, 1.0)
    assert [r.branch for r in below] == [LOWER]
    assert [r.branch for r in above] == [UPPER]


def test_ensemble_max_slope_matches_closed_form(params):
    n = 200
    g = coupling_for_cooperativity(5.0, n, params)
    n0 = saturation_photon_number(g, params.gamma_h)
    closed = critical_drives(5.0, n0, params.kappa)
    numeric = ensemble_critical_drives(homogeneous_ensemble(n, g), params)
    assert not numeric.bistable
    assert numeric.x_at_eta_plus == pytest.approx(closed.x_at_eta_plus, rel=1e-6)
    assert numeric.eta_plus == pytest.approx(closed.eta_plus, rel=1e-7)


@pytest.mark.parametrize('c', [4.0, 6.0, 8.0])
def test_single_root_without_bistability(c):
    for eta in np.linspace(0.1, 20.0, 40):
        roots = homogeneous_steady_states(c, 1.0, eta, 1.0)
        assert len(roots) == 1
        assert roots[0].stable


def test_three_roots_inside_hysteresis():
    drives = critical_drives(14.0, 1.0, 1.0)
    eta = 0.5 * (drives.eta_minus + drives.eta_plus)
    roots = homogeneous_steady_states(14.0, 1.0, eta, 1.0)
    assert [r.branch for r in roots] == [LOWER, MIDDLE, UPPER]
    assert [r.stable for r in roots] == [True, False, True]
    for r in roots:
        assert abs(_reduced(r.x, 14.0, 1.0, eta, 1.0)) < 1e-9 * eta ** 2


def test_tangent_root_at_critical_drive():
    drives = critical_drives(14.0, 1.0, 1.0)
    roots = homogeneous_steady_states(14.0, 1.0, drives.eta_plus, 1.0)
    assert len(roots) == 2
    assert roots[0].tangent
    assert roots[0].x == pytest.approx(drives.x_at_eta_plus, rel=1e-9)


def test_zero_drive():
    roots = homogeneous_steady_states(14.0, 1.0, 0.0, 1.0)
    assert [(r.x, r.branch) for r in roots] == [(0.0, LOWER)]


def test_decoupled_limit():
    roots = homogeneous_steady_states(0.0, 1.0, 3.0, 2.0)
    assert roots[0].x == pytest.approx(9.0 / 4.0)


def test_inhomogeneous_solver_matches_closed_form(params):
    n = 200
    g = coupling_for_cooperativity(14.0, n, params)
    ensemble = homogeneous_ensemble(n, g)
    n0 = saturation_photon_number(g, params.gamma_h)
    closed = critical_drives(14.0, n0, params.kappa)
    numeric = ensemble_critical_drives(ensemble, params)
    assert numeric.bistable
    assert numeric.eta_plus == pytest.approx(closed.eta_plus, rel=1e-8)
    assert numeric.eta_minus == pytest.approx(closed.eta_minus, rel=1e-8)

    eta = 0.5 * (closed.eta_minus + closed.eta_plus)
    expected = [r.x for r in homogeneous_steady_states(14.0, n0, eta, params.kappa)]
    found = [r.x for r in inhom_steady_states(ensemble, params, eta)]
    np.testing.assert_allclose(found, expected, rtol=1e-9)


def test_basin_selection(c14_ensemble, params):
    drives = ensemble_critical_drives(c14_ensemble, params)
    eta = 0.5 * (drives.eta_minus + drives.eta_plus)
    lower, middle, upper = inhom_steady_states(c14_ensemble, params, eta)
    assert inhom_steady_state(c14_ensemble, params, eta, 0.0).x == lower.x
    assert inhom_steady_state(c14_ensemble, params, eta, 0.5 * (middle.x + upper.x)).x == upper.x
    assert inhom_steady_state(c14_ensemble, params, eta, np.inf).x == upper.x


def test_broadening_reduces_hysteresis(params):
    n = 1000
    g = coupling_for_cooperativity(18.0, n, params)
    sharp = ensemble_critical_drives(homogeneous_ensemble(n, g), params)
    narrow = ensemble_critical_drives(gaussian_ensemble(n, mhz_to_angular(0.1), 51, 2.0, g), params)
    wide = ensemble_critical_drives(gaussian_ensemble(n, mhz_to_angular(1.0), 51, 2.0, g), params)
    assert sharp.bistable and narrow.bistable
    assert sharp.eta_plus / sharp.eta_minus > narrow.eta_plus / narrow.eta_minus
    if wide.bistable:
        assert narrow.eta_plus / narrow.eta_minus > wide.eta_plus / wide.eta_minus


def test_curve_validates_grid(c14_ensemble, params):
    with pytest.raises(InvalidGridError):
        semiclassical_curve(c14_ensemble, params, [])
    with pytest.raises(InvalidGridError):
        semiclassical_curve(c14_ensemble, params, [2.0, 1.0])
    points = semiclassical_curve(c14_ensemble, params, np.linspace(0.0, 200.0, 21))
    assert points[0].x == 0.0


def test_mean_field_moments_are_stationary(c14_ensemble, params):
    drives = ensemble_critical_drives(c14_ensemble, params)
    eta = 1.05 * drives.eta_plus
    root = inhom_steady_states(c14_ensemble, params, eta)[-1]
    a, sm, sz = mean_field_moments(c14_ensemble, params, eta, root.x)
    assert abs(a) ** 2 == pytest.approx(root.x, rel=1e-10)
    g, m = c14_ensemble.g, c14_ensemble.weight
    # Максвелл-Блох: da/dt = dσ⁻/dt = dσz/dt = 0
    assert abs(-params.kappa * a - 1j * np.sum(m * g * sm) + eta) < 1e-8 * eta
    assert np.all(np.abs(-params.gamma_perp * sm + 1j * g * sz * a) < 1e-8 * eta)
    dz = -2 * params.gamma_h * (sz + 1) + 2j * g * (sm * np.conj(a) - np.conj(sm) * a)
    assert np.all(np.abs(dz) < 1e-8 * eta)
