import numpy as np
import pytest

from utils.dynamics import exact_steady_state
from utils.errors import AssumptionError, ConfigError
from utils.linalg import tensor3
from utils.models.presets import QubitNQubitParams, ThreeQubitParams
from utils.perturbation import build_phi, check_coup, steady_state_series
from utils.presets import (
    build_qubit_n_qubit,
    build_three_qubit,
    closed_form_kernel_xj,
    default_qubit_n_qubit,
    interior_balance,
    load_preset,
    phi_d_in_level_order,
    qubit_n_qubit_phi_d,
    three_qubit_as_qubit_n_qubit,
    three_qubit_closed_forms,
    three_qubit_operators,
)
from utils.verification import random_qubit_n_qubit, random_three_qubit, three_qubit_deviation


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_kernel_closed_form(rng, n):
    p = random_qubit_n_qubit(n, rng)
    closed = closed_form_kernel_xj(p)
    phi = build_phi(build_qubit_n_qubit(p))
    phi_d = phi_d_in_level_order(phi)
    scale = np.max(np.abs(phi_d))

    assert np.max(np.abs(phi_d @ closed.x_recursive)) / closed.z <= 1e-10 * scale
    np.testing.assert_allclose(closed.x_explicit, closed.x_recursive, rtol=1e-12)
    np.testing.assert_allclose(qubit_n_qubit_phi_d(p), phi_d, atol=1e-10 * scale)
    assert np.trace(closed.rho0).real == pytest.approx(1.0)


def test_kernel_closed_form_matches_coup_kernel(qubit_n_qubit_params, qubit_n_qubit):
    closed = closed_form_kernel_xj(qubit_n_qubit_params)
    phi = build_phi(qubit_n_qubit)
    kernel = check_coup(phi).kernel
    index = np.argmax(np.abs(phi.basis), axis=0)
    levels = np.zeros_like(kernel)
    levels[index] = kernel
    np.testing.assert_allclose(levels, closed.x_recursive / closed.z, atol=1e-10)


def test_balanced_temperatures_give_constant_interior(rng):
    p = random_qubit_n_qubit(5, rng, t_a=0.5, t_b=0.5)
    assert interior_balance(p)
    interior = closed_form_kernel_xj(p).x_recursive[1:-1]
    np.testing.assert_allclose(interior, interior[0], rtol=1e-12)


def test_kernel_needs_the_coupling_hypothesis():
    p = QubitNQubitParams.from_amplitudes(alpha=[1.0, 0.0, 1.0], beta=[1.0, 0.0, 1.0], t_a=0.3, t_b=0.6)
    assert not p.coup_hypothesis
    with pytest.raises(AssumptionError):
        closed_form_kernel_xj(p)


def test_amplitude_lengths_are_checked():
    with pytest.raises(ValueError):
        QubitNQubitParams.from_amplitudes(alpha=[1.0, 1.0], beta=[1.0, 1.0, 1.0], t_a=0.3, t_b=0.6)


def test_three_qubit_matches_closed_forms(rng):
    for _ in range(3):
        assert three_qubit_deviation(random_three_qubit(rng)) <= 1e-9


def test_three_qubit_closed_form_populations(three_qubit_params):
    closed = three_qubit_closed_forms(three_qubit_params)
    np.testing.assert_allclose(np.trace(closed.rho_c0), 1.0)
    np.testing.assert_allclose(closed.phi_d.sum(axis=0), 0.0, atol=1e-14)
    np.testing.assert_allclose(closed.phi_d @ np.diag(closed.rho_c0).real, 0.0, atol=1e-14)
    assert closed.x2_displayed == pytest.approx(1j * closed.d0)


def test_three_qubit_equilibrium_is_product_of_resets():
    p = ThreeQubitParams(t_a=0.3, t_b=0.3)
    model = build_three_qubit(p)
    tau = np.diag([0.3, 0.7])
    np.testing.assert_allclose(exact_steady_state(model, 0.1), tensor3(tau, tau, tau), atol=1e-12)

    closed = three_qubit_closed_forms(p)
    assert closed.kappa0 == 0.0
    assert np.max(np.abs(closed.r2)) == 0.0
    series = steady_state_series(model, order=2, with_map=False)
    assert np.max(np.abs(series.coefficients[1])) <= 1e-12
    assert np.max(np.abs(series.coefficients[2])) <= 1e-12


def test_u_enters_only_at_second_order():
    low = build_three_qubit(ThreeQubitParams(u=0.5))
    high = build_three_qubit(ThreeQubitParams(u=2.0))
    np.testing.assert_allclose(phi_d_in_level_order(build_phi(low)), phi_d_in_level_order(build_phi(high)), atol=1e-12)

    series_low = steady_state_series(low, order=2, with_map=False)
    series_high = steady_state_series(high, order=2, with_map=False)
    np.testing.assert_allclose(series_low.pieces[0], series_high.pieces[0], atol=1e-12)
    assert np.max(np.abs(series_low.pieces[1] - series_high.pieces[1])) > 1e-6


def test_three_qubit_is_relabelled_qubit_n_qubit(three_qubit_params):
    params, relabel = three_qubit_as_qubit_n_qubit(three_qubit_params)
    mapped = build_qubit_n_qubit(params)
    _, h = three_qubit_operators(three_qubit_params)
    np.testing.assert_allclose(relabel @ mapped.h_coupling @ relabel, h, atol=1e-14)
    np.testing.assert_allclose(relabel @ relabel, np.eye(8), atol=1e-14)
    np.testing.assert_allclose(np.diag(mapped.tau_b).real[::-1], [three_qubit_params.ground_b, 1 - three_qubit_params.ground_b])


def test_driven_three_qubit_has_local_energies(three_qubit_params):
    model = build_three_qubit(three_qubit_params, drive=True)
    assert not model.h_c_is_zero
    assert not model.is_undriven
    assert build_phi(model).diag_basis == "h_c"


def test_thermal_weights():
    p = ThreeQubitParams(beta_a=0.0, e_a=2.0)
    assert p.ground_a == pytest.approx(0.5)
    assert ThreeQubitParams(t_a=0.2).ground_a == 0.2
    with pytest.raises(ValueError):
        ThreeQubitParams(beta_a=None)


def test_load_preset_overrides():
    model, params = load_preset("three-qubit", {"u": "2.5", "t_a": "0.4"})
    assert params.u == 2.5
    assert params.ground_a == 0.4
    assert model.shape == (2, 2, 2)

    model, params = load_preset("qubit-n-qubit", {"n": "5", "t_b": "0.3"})
    assert params.n == 5
    assert model.shape == (2, 5, 2)


@pytest.mark.parametrize(
    "name, overrides",
    [("five-qubit", {}), ("three-qubit", {"w": "1"}), ("qubit-n-qubit", {"u": "1"})],
)
def test_load_preset_rejects_unknown(name, overrides):
    with pytest.raises(ConfigError):
        load_preset(name, overrides)


def test_default_qubit_n_qubit_meets_hypothesis():
    p = default_qubit_n_qubit(6)
    assert p.coup_hypothesis
    assert check_coup(build_phi(build_qubit_n_qubit(p))).holds
