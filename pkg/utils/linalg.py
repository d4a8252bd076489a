"""Dense complex linear algebra on the ordered factorization H_A (x) H_C (x) H_B.

Operators are column-stacked when vectorized: vec(X)[i + n*j] = X[i, j], so that
vec(A X B) = (B^T (x) A) vec(X).
"""

import logging
from typing import Callable, Literal

import numpy as np
import scipy.linalg

from env_settings import ENV_SETTINGS
from utils.errors import DimensionError, ResidualError
from utils.models.qrm import SuperOp
from utils.models.spectral import EigResult

log = logging.getLogger(__name__)

Factor = Literal["A", "B", "AB"]


def kron(a: np.ndarray, b: np.ndarray, cap: int | None = None) -> np.ndarray:
    cap = ENV_SETTINGS.dim_cap if cap is None else cap
    rows = a.shape[0] * b.shape[0]
    if rows > cap:
        raise DimensionError(f"kron result acts on dimension {rows}, cap is {cap}")
    return np.kron(a, b)


def tensor3(a: np.ndarray, c: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a (x) c (x) b in the A, C, B ordering."""
    return kron(kron(a, c), b)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def partial_trace(rho: np.ndarray, dims: tuple[int, int, int], over: Factor) -> np.ndarray:
    """Trace out A, B or both from an operator on H_A (x) H_C (x) H_B.

    tr_A lands in B(H_C (x) H_B), tr_B in B(H_A (x) H_C), tr_AB in B(H_C).
    """
    n_a, n_c, n_b = dims
    n = n_a * n_c * n_b
    if rho.shape != (n, n):
        raise DimensionError(f"operator of shape {rho.shape} does not match dims {dims}")
    r = rho.reshape(n_a, n_c, n_b, n_a, n_c, n_b)
    if over == "A":
        return np.einsum("acbaCB->cbCB", r).reshape(n_c * n_b, n_c * n_b)
    if over == "B":
        return np.einsum("acbACb->acAC", r).reshape(n_a * n_c, n_a * n_c)
    if over == "AB":
        return np.einsum("acbaCb->cC", r)
    raise ValueError(f"unknown factor {over!r}")


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def devectorize(v: np.ndarray, n: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    size = v.shape[0]
    if n is None:
        n = int(round(np.sqrt(size)))
    if n * n != size:
        raise DimensionError(f"vector of length {size} is not a vectorized {n}x{n} operator")
    return v.reshape(n, n, order="F")


def basis_operator(i: int, j: int, n: int) -> np.ndarray:
    """|i><j| in B(C^n)."""
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


def superop_from_map(fn: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of a linear map on B(C^n), assembled column by column on |i><j|."""
    return SuperOp.from_map(fn, n).matrix


def apply_superop(matrix: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return devectorize(matrix @ vectorize(rho), rho.shape[0])


def left_superop(a: np.ndarray) -> np.ndarray:
    """X -> a X"""
    return np.kron(identity(a.shape[0]), a)


def right_superop(b: np.ndarray) -> np.ndarray:
    """X -> X b"""
    return np.kron(b.T, identity(b.shape[0]))


def commutator_superop(h: np.ndarray) -> np.ndarray:
    """X -> [h, X]"""
    return left_superop(h) - right_superop(h)


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    tol = ENV_SETTINGS.herm_tol if tol is None else tol
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def commutes(a: np.ndarray, b: np.ndarray, tol: float | None = None) -> bool:
    tol = ENV_SETTINGS.herm_tol if tol is None else tol
    return bool(np.max(np.abs(a @ b - b @ a), initial=0.0) <= tol)


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(scipy.linalg.svdvals(m)))


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    out = np.array(vectors, dtype=complex)
    for col in range(out.shape[1]):
        v = out[:, col]
        scale = np.max(np.abs(v), initial=0.0)
        if scale == 0.0:
            continue
        pivot = np.flatnonzero(np.abs(v) > 1e-8 * scale)[0]
        out[:, col] = v * (abs(v[pivot]) / v[pivot])
    return out


def eigh_sorted(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues of a Hermitian matrix with phase-fixed eigenvectors."""
    values, vectors = scipy.linalg.eigh(h)
    return values, fix_phases(vectors)


def _cluster(values: np.ndarray, tol: float) -> list[list[int]]:
    clusters: list[list[int]] = []
    for index, value in enumerate(values):
        for cluster in clusters:
            if abs(values[cluster[0]] - value) <= tol:
                cluster.append(index)
                break
        else:
            clusters.append([index])
    return clusters


def eig(m: np.ndarray, tol: float | None = None) -> EigResult:
    """Eigenvalues sorted by (Re, Im) with right eigenvectors and diagnostics."""
    tol = ENV_SETTINGS.spectral_tol if tol is None else tol
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eig needs a square matrix, got shape {m.shape}")
    try:
        values, vectors = scipy.linalg.eig(m)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise ResidualError(f"eigensolver failed: {e}") from e

    order = np.lexsort((np.round(values.imag, 9), np.round(values.real, 9)))
    values = values[order]
    vectors = fix_phases(vectors[:, order] / np.linalg.norm(vectors[:, order], axis=0))

    scale = max(float(np.linalg.norm(m, 2)), 1.0)
    residuals = np.linalg.norm(m @ vectors - vectors * values, axis=0) / scale

    defective = np.zeros(len(values), dtype=bool)
    for cluster in _cluster(values, tol * scale):
        if len(cluster) > 1 and numeric_rank(vectors[:, cluster], tol) < len(cluster):
            defective[cluster] = True
    if defective.any():
        log.warning(f"eig: {int(defective.sum())} eigenvalues belong to non-semisimple blocks")

    singular = scipy.linalg.svdvals(vectors)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")

    return EigResult(
        values=values,
        vectors=vectors,
        residuals=residuals,
        defective=defective,
        condition=condition,
    )


def expm(m: np.ndarray) -> np.ndarray:
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise ResidualError("matrix exponential overflowed")
    return out


def numeric_rank(m: np.ndarray, tol: float | None = None) -> int:
    """Number of singular values above tol * sigma_max."""
    tol = ENV_SETTINGS.null_tol if tol is None else tol
    singular = scipy.linalg.svdvals(m)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > tol * singular[0]))


def null_space(m: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the numerical kernel, one vector per column."""
    tol = ENV_SETTINGS.null_tol if tol is None else tol
    if not np.any(m):
        return np.eye(m.shape[1], dtype=complex)
    return scipy.linalg.null_space(m, rcond=tol)
