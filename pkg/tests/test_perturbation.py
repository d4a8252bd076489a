import numpy as np
import pytest

from utils.dynamics import fit_second_order_coefficients
from utils.errors import AssumptionError
from utils.models.presets import ThreeQubitParams
from utils.models.qrm import HilbertDims, QrmModel
from utils.perturbation import (
    build_phi,
    check_coup,
    check_coup_matrix,
    effective_hamiltonians,
    h_operators,
    q0_l1_q0,
    q0_l1_q0_deviation,
    second_order_eigenvalues,
)
from utils.presets import build_three_qubit, phi_d_in_level_order, three_qubit_closed_forms
from utils.sampling import random_model
from utils.verification import REDUCIBLE_PHI_D, check_generator, coupled_random_models, random_sign_pattern


def test_h_bar_tau_matches_double_sum(rng):
    model = random_model((2, 3, 2), rng, drive=True)
    eff = effective_hamiltonians(model)
    assert eff.double_sum_deviation <= 1e-12
    np.testing.assert_allclose(eff.h_bar_tau, eff.h_bar_tau.conj().T, atol=1e-12)


def test_three_qubit_h_bar_tau(three_qubit_params, three_qubit):
    p = three_qubit_params
    eff = effective_hamiltonians(three_qubit)
    expected = np.diag([0.0, p.u * (2 - p.ground_a - p.ground_b)])
    np.testing.assert_allclose(eff.h_bar_tau, expected, atol=1e-12)
    assert eff.spec_simple


@pytest.mark.parametrize("with_h_c", [False, True])
def test_first_order_map_matches_projected_coupling(rng, with_h_c):
    model = random_model((2, 2, 2), rng, with_h_c=with_h_c)
    assert q0_l1_q0_deviation(model) <= 1e-10
    if with_h_c:
        assert np.max(np.abs(q0_l1_q0(model).matrix)) == 0.0


def test_phi_d_is_a_transposed_rate_matrix(three_qubit):
    phi = build_phi(three_qubit)
    np.testing.assert_allclose(phi.phi_d.sum(axis=0), 0.0, atol=1e-12)
    assert phi.phi_d[0, 1] > 0 and phi.phi_d[1, 0] > 0
    assert phi.l0_is_dissipator
    assert phi.h_route_deviation <= 1e-10


def test_phi_d_matches_three_qubit_closed_form(three_qubit_params, three_qubit):
    phi = build_phi(three_qubit)
    np.testing.assert_allclose(phi_d_in_level_order(phi), three_qubit_closed_forms(three_qubit_params).phi_d, atol=1e-10)


def test_h_operators_are_positive(rng):
    model = coupled_random_models(rng, 1, dims=(2, 3, 2))[0]
    phi = build_phi(model)
    for h_k in h_operators(model, phi.basis):
        assert np.linalg.eigvalsh((h_k + h_k.conj().T) / 2).min() >= -1e-12


def test_degenerate_h_bar_tau_is_refused():
    model = build_three_qubit(ThreeQubitParams(u=0.0))
    with pytest.raises(AssumptionError, match="Spec"):
        build_phi(model)


def test_zero_coupling_gives_zero_phi():
    model = QrmModel(
        dims=HilbertDims(n_a=2, n_c=2, n_b=2),
        tau_a=np.diag([0.6, 0.4]),
        tau_b=np.diag([0.3, 0.7]),
        gamma_a=1.0,
        gamma_b=1.0,
    )
    phi = build_phi(model, allow_degenerate=True)
    assert np.max(np.abs(phi.phi)) == 0.0
    assert not check_coup(phi).holds


def test_reducible_chain_kernel():
    report = check_coup_matrix(REDUCIBLE_PHI_D)
    assert report.holds
    assert report.rank == 2
    assert report.criteria_agree
    assert report.closed_classes == 1
    assert report.zero_components == [0]
    np.testing.assert_allclose(report.kernel, [0.0, 0.5, 0.5], atol=1e-12)


def test_rank_and_closed_class_criteria_agree(rng):
    for _ in range(50):
        report = check_coup_matrix(random_sign_pattern(int(rng.integers(2, 7)), rng))
        assert report.criteria_agree


def test_witness_row_certifies_coup():
    phi_d = np.array([[-1.0, 2.0, 1.0], [1.0, -2.0, 0.0], [0.0, 0.0, -1.0]])
    report = check_coup_matrix(phi_d)
    assert report.witness == 0
    assert report.holds


def test_disconnected_chain_fails_coup():
    phi_d = np.array([[-1.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 1.0], [0.0, 0.0, 1.0, -1.0]])
    report = check_coup_matrix(phi_d)
    assert not report.holds
    assert report.closed_classes == 2


@pytest.mark.parametrize("seed", range(8))
def test_second_order_eigenvalues_are_dissipative(seed):
    for model in coupled_random_models(np.random.default_rng(seed), 3):
        corrections = second_order_eigenvalues(model)
        assert len(corrections) == model.dims.n_c * (model.dims.n_c - 1)
        assert all(c.bound_applies for c in corrections)
        assert max(c.value.real for c in corrections) <= 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_second_order_eigenvalues_match_numeric_fit(seed):
    for model in coupled_random_models(np.random.default_rng(seed), 2):
        fits = fit_second_order_coefficients(model, [0.005, 0.01, 0.02])
        assert fits
        assert max(fit.relative_error for fit in fits) <= 2e-2


def test_quadratic_bound_is_exceeded_by_an_undriven_model():
    # drawn by the eigenvalue-bound check under the default seed
    models = coupled_random_models(check_generator("eigenvalue-bound", seed=20190601), 10)
    model = next(m for m in models if abs(m.gamma_a - 1.739) < 5e-4 and abs(m.gamma_b - 0.836) < 5e-4)
    assert model.is_undriven

    corrections = {(c.j, c.k): c for c in second_order_eigenvalues(model)}
    worst = corrections[(0, 1)]
    assert worst.bohr == pytest.approx(-0.854715, abs=1e-5)
    assert worst.value.real == pytest.approx(-0.97542, abs=1e-4)
    assert worst.bound == pytest.approx(-1.01059, abs=1e-4)
    assert worst.value.real - worst.bound == pytest.approx(0.03517, abs=1e-4)
    assert not worst.satisfies_bound

    assert all(c.value.real <= 0 for c in corrections.values())
    fits = {(f.j, f.k): f for f in fit_second_order_coefficients(model, [0.005, 0.01, 0.02])}
    assert fits[(0, 1)].relative_error <= 2e-2


def test_second_order_eigenvalues_need_h_c_zero(rng):
    with pytest.raises(AssumptionError):
        second_order_eigenvalues(random_model((2, 2, 2), rng, with_h_c=True))
