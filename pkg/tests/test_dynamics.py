import numpy as np
import pytest

from utils.dynamics import (
    approach_time,
    approach_time_scaling,
    error_scaling_sweep,
    exact_steady_state,
    fit_second_order_coefficients,
    kernel_dimension,
    propagate_exact,
    propagate_ode,
    propagate_reduced,
    propagate_steady_projector,
    spectral_gap_diagnostics,
    uncoupled_decay,
)
from utils.errors import ConfigError, ModelInvariantError
from utils.linalg import tensor3
from utils.sampling import random_density, random_model, random_product_state
from utils.verification import APPROACH_G


@pytest.fixture
def excited_start(three_qubit_params):
    p = three_qubit_params
    return tensor3(np.diag([p.ground_a, 1 - p.ground_a]), np.diag([0.0, 1.0]), np.diag([p.ground_b, 1 - p.ground_b]))


def test_exact_propagation_preserves_states(three_qubit, excited_start):
    result = propagate_exact(three_qubit, excited_start, [0.0, 1.0, 10.0, 100.0], g=0.1)
    assert result.trace_drift() <= 1e-10
    assert result.hermiticity_drift() <= 1e-10
    assert result.min_eigenvalue() >= -1e-10
    np.testing.assert_allclose(result.states[0], excited_start)


def test_ode_agrees_with_matrix_exponential(rng):
    model = random_model((2, 2, 2), rng, drive=True, g=0.3)
    rho0 = random_product_state(model, rng)
    times = np.linspace(0.0, 5.0, 6)
    exact = propagate_exact(model, rho0, times)
    ode = propagate_ode(model, rho0, times)
    assert np.max(exact.distances(ode)) <= 1e-8


def test_long_time_limit_is_the_steady_state(three_qubit, excited_start):
    g = 0.3
    late = propagate_exact(three_qubit, excited_start, [1e5], g).states[0]
    np.testing.assert_allclose(late, exact_steady_state(three_qubit, g), atol=1e-8)


def test_reduced_dynamics_tracks_exact(three_qubit, excited_start):
    g = 0.02
    times = np.array([1.0, 3.0]) / g**2
    exact = propagate_exact(three_qubit, excited_start, times, g)
    reduced = propagate_reduced(three_qubit, excited_start, times, g)
    assert np.max(exact.distances(reduced)) <= 0.1


def test_uncoupled_state_relaxes_onto_kernel_at_slowest_reset_rate(three_qubit, rng):
    # coherences on A and B and between C levels, so every family is populated
    rho0 = random_density(three_qubit.n, rng)
    rate = min(three_qubit.gamma_a, three_qubit.gamma_b)
    times = np.array([0.0, 1.0, 5.0, 10.0]) / rate
    decay = uncoupled_decay(three_qubit, rho0, times)
    assert decay[0] > 1e-3

    envelope = decay * np.exp(rate * times)
    assert np.all(envelope[1:] <= 6 * decay[0])
    # only the B-traceless part survives this long, damped at exactly gamma_b
    assert envelope[3] == pytest.approx(envelope[2], rel=0.1)


def test_steady_projector_keeps_trace(three_qubit, excited_start):
    result = propagate_steady_projector(three_qubit, excited_start, [0.0, 50.0], g=0.1)
    assert result.trace_drift() <= 1e-8
    assert kernel_dimension(three_qubit) == 4


def test_initial_state_must_fit_the_model(three_qubit):
    with pytest.raises(ModelInvariantError):
        propagate_exact(three_qubit, np.eye(2) / 2, [0.0])


def test_negative_times_are_rejected(three_qubit, excited_start):
    with pytest.raises(ConfigError):
        propagate_exact(three_qubit, excited_start, [-1.0])


def test_approach_time_grows_as_inverse_square(three_qubit, excited_start):
    report = approach_time_scaling(three_qubit, excited_start, APPROACH_G)
    assert report.fit.slope == pytest.approx(-2.0, abs=0.2)


def test_approach_time_is_zero_from_the_steady_state(three_qubit):
    steady = exact_steady_state(three_qubit, 0.1)
    assert approach_time(three_qubit, steady, 0.1) == 0.0


@pytest.mark.slow
def test_reduced_remainder_is_first_order(three_qubit, excited_start):
    sweep = error_scaling_sweep(three_qubit, excited_start, APPROACH_G)
    assert sweep.noise_floor or sweep.fit.slope == pytest.approx(1.0, abs=0.2)
    assert sweep.errors.shape == (len(APPROACH_G), 12)


def test_spectral_gap_report(three_qubit):
    report = spectral_gap_diagnostics(three_qubit, 0.05)
    assert report.max_real_part <= 1e-8
    assert report.gamma > 0
    assert report.delta > 0
    assert len(report.tracked) == 4


def test_second_order_fit_matches_correction(three_qubit):
    fits = fit_second_order_coefficients(three_qubit, [0.005, 0.01, 0.02])
    assert len(fits) == 2
    for fit in fits:
        assert fit.relative_error <= 0.05
