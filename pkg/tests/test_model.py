import numpy as np
import pytest
from pydantic import ValidationError

from utils.linalg import expm, vectorize
from utils.model import (
    apply_dissipator,
    build_dissipator,
    build_kraus_dissipator,
    build_lindbladian,
    build_simple_lindbladian,
    gen_holds,
    hamiltonian_total,
    simple_qrm_solve,
    simple_qrm_steady_state,
)
from utils.models.qrm import HilbertDims, QrmModel, ResetSpec, SimpleQrm
from utils.sampling import random_density, random_hermitian, random_model, random_product_state


def qubit_model(**overrides) -> QrmModel:
    data = dict(
        dims=HilbertDims(n_a=2, n_c=2, n_b=2),
        tau_a=np.diag([0.7, 0.3]),
        tau_b=np.diag([0.4, 0.6]),
        gamma_a=1.0,
        gamma_b=2.0,
        h_coupling=np.eye(8),
    )
    data.update(overrides)
    return QrmModel(**data)


def test_missing_hamiltonians_default_to_zero():
    model = qubit_model()
    assert model.is_undriven
    assert model.h_c_is_zero
    assert model.h_a.shape == (2, 2)


def test_rejects_non_hermitian_coupling():
    h = np.zeros((8, 8))
    h[0, 1] = 1.0
    with pytest.raises(ValidationError, match="h_coupling is not Hermitian"):
        qubit_model(h_coupling=h)


def test_rejects_reset_state_with_wrong_trace():
    with pytest.raises(ValidationError, match="unit trace"):
        qubit_model(tau_a=np.diag([0.7, 0.7]))


def test_rejects_drive_not_commuting_with_reset_state():
    with pytest.raises(ValidationError, match="h_a, tau_a"):
        qubit_model(h_a=np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_rejects_non_positive_rate():
    with pytest.raises(ValidationError):
        qubit_model(gamma_a=0.0)


def test_dimension_cap():
    with pytest.raises(ValidationError, match="dimension cap"):
        HilbertDims(n_a=5, n_c=5, n_b=5)


def test_model_hash_is_stable_under_serialization(rng):
    model = random_model((2, 2, 2), rng, drive=True)
    restored = QrmModel.from_dict(model.to_dict())
    assert restored.model_hash() == model.model_hash()
    assert model.with_g(0.1).model_hash() != model.model_hash()


def test_dissipator_preserves_trace_and_kills_reset_product(rng):
    model = random_model((2, 3, 2), rng)
    rho = random_product_state(model, rng)
    assert abs(np.trace(apply_dissipator(model, rho))) < 1e-12
    fixed = np.kron(np.kron(model.tau_a, random_density(3, rng)), model.tau_b)
    np.testing.assert_allclose(apply_dissipator(model, fixed), 0.0, atol=1e-12)


def test_kraus_form_reproduces_dissipator(rng):
    for _ in range(5):
        model = random_model((2, 2, 3), rng)
        _, kraus_a = build_kraus_dissipator(model.tau_a, model.dims, "A")
        _, kraus_b = build_kraus_dissipator(model.tau_b, model.dims, "B")
        assembled = model.gamma_a * kraus_a.matrix + model.gamma_b * kraus_b.matrix
        assert np.max(np.abs(assembled - build_dissipator(model).matrix)) <= 1e-12


def test_lindbladian_is_trace_preserving(rng):
    model = random_model((2, 2, 2), rng, drive=True, with_h_c=True)
    trace_row = vectorize(np.eye(model.n)).conj()
    np.testing.assert_allclose(trace_row @ build_lindbladian(model, 0.3).matrix, 0.0, atol=1e-12)


def test_total_hamiltonian_scales_with_g(rng):
    model = random_model((2, 2, 2), rng, drive=True)
    np.testing.assert_allclose(
        hamiltonian_total(model, 0.5) - hamiltonian_total(model, 0.0), 0.5 * model.h_coupling, atol=1e-12
    )


def test_gen_detects_degenerate_bohr_frequencies():
    assert gen_holds(np.diag([0.0, 1.0, 3.0]))
    assert not gen_holds(np.diag([0.0, 1.0, 2.0]))
    assert not gen_holds(np.diag([0.0, 0.0, 1.0]))


def simple_model(rng, h: np.ndarray) -> SimpleQrm:
    n = h.shape[0]
    resets = [ResetSpec(tau=random_density(n, rng), gamma=g) for g in (0.5, 1.5)]
    return SimpleQrm(dim=n, hamiltonian=h, resets=resets)


def test_simple_model_closed_form_matches_expm(rng):
    q = simple_model(rng, np.diag([0.0, 1.0, 3.0]) + 0.1 * random_hermitian(3, rng))
    rho0 = random_density(3, rng)
    generator = build_simple_lindbladian(q).matrix
    for t in (0.1, 1.0, 5.0):
        expected = (expm(t * generator) @ vectorize(rho0)).reshape(3, 3, order="F")
        np.testing.assert_allclose(simple_qrm_solve(q, rho0, t), expected, atol=1e-10)


def test_simple_model_falls_back_to_expm_without_gen(rng):
    q = simple_model(rng, np.diag([0.0, 1.0, 2.0]))
    rho0 = random_density(3, rng)
    expected = (expm(2.0 * build_simple_lindbladian(q).matrix) @ vectorize(rho0)).reshape(3, 3, order="F")
    np.testing.assert_allclose(simple_qrm_solve(q, rho0, 2.0), expected, atol=1e-10)


def test_simple_model_steady_state(rng):
    q = simple_model(rng, random_hermitian(3, rng))
    rho = simple_qrm_steady_state(q)
    assert np.trace(rho) == pytest.approx(1.0)
    np.testing.assert_allclose(build_simple_lindbladian(q).matrix @ vectorize(rho), 0.0, atol=1e-12)
