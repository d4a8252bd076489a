import numpy as np
import pytest

from utils.errors import AssumptionError, ConfigError
from utils.markov import (
    chapman_kolmogorov_deviation,
    rate_matrix_from_phi,
    stationary_distribution,
    transition_probabilities,
)
from utils.models.presets import ThreeQubitParams
from utils.models.stochastic import RateMatrix
from utils.perturbation import build_phi, check_coup
from utils.presets import build_three_qubit, three_qubit_transition_probabilities
from utils.verification import MARKOV_S, reorder_to_levels


@pytest.fixture
def qubit_n_qubit_rates(qubit_n_qubit):
    return rate_matrix_from_phi(build_phi(qubit_n_qubit))


def test_rate_matrix_is_phi_d_transposed(qubit_n_qubit):
    phi = build_phi(qubit_n_qubit)
    rates = rate_matrix_from_phi(phi)
    np.testing.assert_allclose(rates.q, phi.phi_d.T, atol=1e-12)
    np.testing.assert_allclose(rates.q.sum(axis=1), 0.0, atol=1e-12)
    assert rates.coup_holds
    assert len(rates.labels) == rates.n_states


@pytest.mark.parametrize("s", MARKOV_S)
def test_transition_kernel_is_stochastic(qubit_n_qubit_rates, s):
    kernel = transition_probabilities(qubit_n_qubit_rates, s)
    np.testing.assert_allclose(kernel.p.sum(axis=1), 1.0, atol=1e-10)
    assert kernel.p.min() >= 0.0
    assert kernel.clamped <= 1e-12


def test_transition_kernel_at_zero_is_identity(qubit_n_qubit_rates):
    np.testing.assert_allclose(transition_probabilities(qubit_n_qubit_rates, 0.0).p, np.eye(4), atol=1e-14)


def test_negative_time_is_rejected(qubit_n_qubit_rates):
    with pytest.raises(ConfigError):
        transition_probabilities(qubit_n_qubit_rates, -1.0)


def test_stationary_distribution_is_the_coup_kernel(qubit_n_qubit):
    phi = build_phi(qubit_n_qubit)
    pi = stationary_distribution(rate_matrix_from_phi(phi))
    np.testing.assert_allclose(pi, check_coup(phi).kernel, atol=1e-10)
    assert pi.sum() == pytest.approx(1.0)


def test_long_time_rows_approach_stationary(qubit_n_qubit_rates):
    pi = stationary_distribution(qubit_n_qubit_rates)
    p = transition_probabilities(qubit_n_qubit_rates, 1e3).p
    for row in p:
        np.testing.assert_allclose(row, pi, atol=1e-8)


def test_chapman_kolmogorov(qubit_n_qubit_rates):
    assert chapman_kolmogorov_deviation(qubit_n_qubit_rates, 0.3, 1.1) <= 1e-10


@pytest.mark.parametrize("s", [0.1, 0.5, 2.0])
def test_three_qubit_probabilities_match_closed_form(three_qubit_params, three_qubit, s):
    phi = build_phi(three_qubit)
    numeric = reorder_to_levels(transition_probabilities(rate_matrix_from_phi(phi), s).p, phi.basis)
    np.testing.assert_allclose(numeric, three_qubit_transition_probabilities(three_qubit_params, s), atol=1e-10)


def test_driven_model_has_no_chain():
    phi = build_phi(build_three_qubit(ThreeQubitParams(), drive=True))
    with pytest.raises(AssumptionError):
        rate_matrix_from_phi(phi)


def test_reducible_chain_has_no_unique_stationary_distribution():
    rates = RateMatrix(q=np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))
    with pytest.raises(AssumptionError):
        stationary_distribution(rates)


def test_mean_first_passage_of_two_state_chain():
    rates = RateMatrix(q=np.array([[-2.0, 2.0], [3.0, -3.0]]))
    np.testing.assert_allclose(rates.mean_first_passage_times(1), [0.5, 0.0])
    np.testing.assert_allclose(rates.embedded_chain, [[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(rates.jump_rates, [2.0, 3.0])


def test_rate_matrix_rejects_negative_rates():
    with pytest.raises(ValueError):
        RateMatrix(q=np.array([[1.0, -1.0], [1.0, -1.0]]))
