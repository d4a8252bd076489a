"""Seeded random operators and models for randomized checks."""

import numpy as np
from scipy.stats import unitary_group

from utils.linalg import dagger, tensor3
from utils.models.qrm import HilbertDims, QrmModel


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (z + dagger(z)) / 2


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(n, random_state=rng)


def random_density(n: int, rng: np.random.Generator, full_rank: bool = True) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = z @ dagger(z)
    if full_rank:
        rho = rho + 0.1 * np.trace(rho).real / n * np.eye(n)
    return rho / np.trace(rho)


def random_commuting_pair(
    n: int,
    rng: np.random.Generator,
    drive: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """(H, tau) diagonal in a common random basis; H = 0 unless drive."""
    v = random_unitary(n, rng)
    weights = rng.uniform(0.2, 1.0, size=n)
    tau = v @ np.diag(weights / weights.sum()) @ dagger(v)
    tau = (tau + dagger(tau)) / 2
    if not drive:
        return np.zeros((n, n), dtype=complex), tau
    h = v @ np.diag(rng.uniform(-1.0, 1.0, size=n)) @ dagger(v)
    return (h + dagger(h)) / 2, tau


def random_model(
    dims: tuple[int, int, int],
    rng: np.random.Generator,
    drive: bool = False,
    with_h_c: bool = False,
    coupling_scale: float = 1.0,
    g: float = 0.0,
) -> QrmModel:
    """Random tri-partite model.

    With drive, H_A and H_B are random and commute with their reset states.
    With with_h_c, H_C is diagonal with well separated random levels.
    """
    n_a, n_c, n_b = dims
    h_a, tau_a = random_commuting_pair(n_a, rng, drive)
    h_b, tau_b = random_commuting_pair(n_b, rng, drive)
    h_c = np.zeros((n_c, n_c), dtype=complex)
    if with_h_c:
        levels = np.cumsum(rng.uniform(0.5, 1.5, size=n_c) * (1.0 + np.arange(n_c) / n_c))
        h_c = np.diag(levels - levels.mean()).astype(complex)
    h = random_hermitian(n_a * n_c * n_b, rng, scale=coupling_scale / np.sqrt(n_a * n_c * n_b))
    return QrmModel(
        dims=HilbertDims(n_a=n_a, n_c=n_c, n_b=n_b),
        tau_a=tau_a,
        tau_b=tau_b,
        gamma_a=float(rng.uniform(0.5, 2.0)),
        gamma_b=float(rng.uniform(0.5, 2.0)),
        h_a=h_a,
        h_b=h_b,
        h_c=h_c,
        h_coupling=h,
        g=g,
    )


def random_product_state(model: QrmModel, rng: np.random.Generator) -> np.ndarray:
    n_a, n_c, n_b = model.shape
    return tensor3(random_density(n_a, rng), random_density(n_c, rng), random_density(n_b, rng))
