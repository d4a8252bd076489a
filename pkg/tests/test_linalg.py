import numpy as np
import pytest

from utils.errors import DimensionError
from utils.linalg import (
    commutator_superop,
    devectorize,
    eig,
    frobenius,
    kron,
    null_space,
    numeric_rank,
    partial_trace,
    superop_from_map,
    tensor3,
    trace_norm,
    vectorize,
)
from utils.models.qrm import SuperOp
from utils.sampling import random_density, random_hermitian


def test_vectorization_is_column_stacking():
    x = np.arange(4).reshape(2, 2)
    np.testing.assert_array_equal(vectorize(x), [0, 2, 1, 3])
    np.testing.assert_array_equal(devectorize(vectorize(x)), x)


def test_sandwich_identity(rng):
    a, x, b = (random_hermitian(3, rng) for _ in range(3))
    np.testing.assert_allclose(np.kron(b.T, a) @ vectorize(x), vectorize(a @ x @ b), atol=1e-12)


def test_devectorize_rejects_non_square_length():
    with pytest.raises(DimensionError):
        devectorize(np.zeros(5))


@pytest.mark.parametrize("dims", [(2, 3, 2), (1, 2, 3), (3, 1, 2)])
def test_partial_traces_of_product(rng, dims):
    n_a, n_c, n_b = dims
    a, c, b = random_density(n_a, rng), random_density(n_c, rng), random_density(n_b, rng)
    rho = tensor3(a, c, b)
    np.testing.assert_allclose(partial_trace(rho, dims, "AB"), c, atol=1e-12)
    np.testing.assert_allclose(partial_trace(rho, dims, "A"), np.kron(c, b), atol=1e-12)
    np.testing.assert_allclose(partial_trace(rho, dims, "B"), np.kron(a, c), atol=1e-12)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(7), (2, 2, 2), "AB")


def test_commutator_superop_matches_map(rng):
    h = random_hermitian(3, rng)
    np.testing.assert_allclose(commutator_superop(h), superop_from_map(lambda x: h @ x - x @ h, 3), atol=1e-12)


def test_superop_from_map_applies_the_map(rng):
    a, b, x = random_hermitian(3, rng), random_density(3, rng), random_density(3, rng)
    op = SuperOp.from_map(lambda m: a @ m @ b, 3)
    np.testing.assert_allclose(op.apply(x), a @ x @ b, atol=1e-12)
    np.testing.assert_array_equal(superop_from_map(lambda m: a @ m @ b, 3), op.matrix)


def test_kron_respects_dimension_cap():
    assert kron(np.eye(4), np.eye(8), cap=32).shape == (32, 32)
    with pytest.raises(DimensionError):
        kron(np.eye(8), np.eye(8), cap=32)
    with pytest.raises(DimensionError):
        kron(np.eye(8), np.eye(16))


def test_tensor3_respects_dimension_cap():
    with pytest.raises(DimensionError):
        tensor3(np.eye(4), np.eye(5), np.eye(4))


def test_rank_and_null_space():
    m = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert numeric_rank(m) == 1
    kernel = null_space(m)
    assert kernel.shape == (2, 1)
    np.testing.assert_allclose(m @ kernel, 0.0, atol=1e-12)
    assert null_space(np.zeros((3, 3))).shape == (3, 3)


def test_eig_is_sorted_with_small_residuals(rng):
    m = random_hermitian(4, rng) + 1j * np.diag([0.0, 1.0, 2.0, 3.0])
    result = eig(m)
    keys = list(zip(np.round(result.values.real, 9), np.round(result.values.imag, 9)))
    assert keys == sorted(keys)
    assert result.residuals.max() < 1e-12
    assert result.semisimple


def test_eig_flags_jordan_block():
    result = eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert not result.semisimple


def test_norms():
    m = np.diag([3.0, -4.0])
    assert frobenius(m) == pytest.approx(5.0)
    assert trace_norm(m) == pytest.approx(7.0)
