"""Generators of quantum reset models.

The tri-partite generator is
    L_g = -i[H_A + H_C + H_B + g H, .] + D,
    D(rho) = gamma_a (tau_a (x) tr_A rho - rho) + gamma_b (tr_B rho (x) tau_b - rho).
"""

import logging

import numpy as np

from env_settings import ENV_SETTINGS
from utils.errors import DimensionError, ModelInvariantError
from utils.linalg import (
    commutator_superop,
    dagger,
    eigh_sorted,
    expm,
    identity,
    kron,
    partial_trace,
    superop_from_map,
    tensor3,
    vectorize,
    devectorize,
)
from utils.models.qrm import HilbertDims, QrmModel, SimpleQrm, SuperOp

log = logging.getLogger(__name__)


def _check_operator(model: QrmModel, rho: np.ndarray) -> None:
    if rho.shape != (model.n, model.n):
        raise DimensionError(f"operator of shape {rho.shape} does not act on dimension {model.n}")


def reset_a(model: QrmModel, rho: np.ndarray) -> np.ndarray:
    """tau_a (x) tr_A rho"""
    _check_operator(model, rho)
    return kron(model.tau_a, partial_trace(rho, model.shape, "A"))


def reset_b(model: QrmModel, rho: np.ndarray) -> np.ndarray:
    """tr_B rho (x) tau_b"""
    _check_operator(model, rho)
    return kron(partial_trace(rho, model.shape, "B"), model.tau_b)


def reset_ab(model: QrmModel, rho: np.ndarray) -> np.ndarray:
    """tau_a (x) tr_AB rho (x) tau_b"""
    _check_operator(model, rho)
    return tensor3(model.tau_a, partial_trace(rho, model.shape, "AB"), model.tau_b)


def apply_dissipator(model: QrmModel, rho: np.ndarray) -> np.ndarray:
    return model.gamma_a * (reset_a(model, rho) - rho) + model.gamma_b * (reset_b(model, rho) - rho)


def build_dissipator(model: QrmModel) -> SuperOp:
    matrix = superop_from_map(lambda rho: apply_dissipator(model, rho), model.n)
    return SuperOp(dim=model.n, matrix=matrix, label="D")


def _kraus_superop(operators: list[np.ndarray]) -> np.ndarray:
    n = operators[0].shape[0]
    eye = identity(n)
    matrix = np.zeros((n * n, n * n), dtype=complex)
    for a in operators:
        ada = dagger(a) @ a
        matrix += np.kron(a.conj(), a) - 0.5 * (np.kron(eye, ada) + np.kron(ada.T, eye))
    return matrix


def build_kraus_dissipator(
    tau: np.ndarray,
    dims: HilbertDims,
    side: str = "A",
) -> tuple[list[np.ndarray], SuperOp]:
    """Kraus form of the reset rho -> tau (x) tr_A rho - rho (or its B mirror).

    A_jk = sqrt(t_j) |phi_j><phi_k| (x) I, with tau = sum_j t_j |phi_j><phi_j|.
    Terms with t_j = 0 are dropped.
    """
    tol = ENV_SETTINGS.herm_tol
    weights, vectors = eigh_sorted(tau)
    if weights[0] < -tol:
        raise ModelInvariantError(f"reset state is not positive semidefinite (lowest eigenvalue {weights[0]:.3e})")
    weights = np.clip(weights, 0.0, None)

    n_reset = tau.shape[0]
    if side == "A":
        if n_reset != dims.n_a:
            raise DimensionError(f"tau has dimension {n_reset}, H_A has {dims.n_a}")
        rest = identity(dims.n_c * dims.n_b)
        embed = lambda local: kron(local, rest)  # noqa: E731
    elif side == "B":
        if n_reset != dims.n_b:
            raise DimensionError(f"tau has dimension {n_reset}, H_B has {dims.n_b}")
        rest = identity(dims.n_a * dims.n_c)
        embed = lambda local: kron(rest, local)  # noqa: E731
    else:
        raise ValueError(f"unknown reset side {side!r}")

    operators = []
    for j in range(n_reset):
        if weights[j] <= tol:
            continue
        for k in range(n_reset):
            local = np.sqrt(weights[j]) * np.outer(vectors[:, j], vectors[:, k].conj())
            operators.append(embed(local))

    superop = SuperOp(dim=dims.n, matrix=_kraus_superop(operators), label=f"kraus-{side}")
    return operators, superop


def uncoupled_hamiltonian(model: QrmModel) -> np.ndarray:
    """H_0 = H_A (x) I (x) I + I (x) H_C (x) I + I (x) I (x) H_B"""
    n_a, n_c, n_b = model.shape
    return (
        tensor3(model.h_a, identity(n_c), identity(n_b))
        + tensor3(identity(n_a), model.h_c, identity(n_b))
        + tensor3(identity(n_a), identity(n_c), model.h_b)
    )


def hamiltonian_total(model: QrmModel, g: float | None = None) -> np.ndarray:
    g = model.g if g is None else g
    return uncoupled_hamiltonian(model) + g * model.h_coupling


def build_coupling(model: QrmModel) -> SuperOp:
    """L_1 = -i[H, .]"""
    return SuperOp(dim=model.n, matrix=-1j * commutator_superop(model.h_coupling), label="L1")


def build_uncoupled(model: QrmModel) -> SuperOp:
    """L_0 = -i[H_0, .] + D"""
    matrix = -1j * commutator_superop(uncoupled_hamiltonian(model)) + build_dissipator(model).matrix
    return SuperOp(dim=model.n, matrix=matrix, label="L0")


def build_lindbladian(model: QrmModel, g: float | None = None) -> SuperOp:
    g = model.g if g is None else g
    matrix = build_uncoupled(model).matrix + g * build_coupling(model).matrix
    return SuperOp(dim=model.n, matrix=matrix, label=f"L(g={g})")


def build_simple_lindbladian(q: SimpleQrm) -> SuperOp:
    """-i[H, .] + sum_l gamma_l (tau_l tr(.) - .)"""
    n = q.dim
    trace_row = vectorize(identity(n))[np.newaxis, :]
    matrix = -1j * commutator_superop(q.hamiltonian)
    for reset in q.resets:
        matrix = matrix + reset.gamma * (np.outer(vectorize(reset.tau), trace_row) - np.eye(n * n))
    return SuperOp(dim=n, matrix=matrix, label="L-simple")


def level_diagnostics(energies: np.ndarray, tol: float | None = None) -> tuple[bool, bool]:
    """(simple spectrum, pairwise distinct Bohr frequencies) for ascending energies."""
    tol = ENV_SETTINGS.gap_tol if tol is None else tol
    energies = np.asarray(energies, dtype=float)
    scale = max(float(np.max(np.abs(energies), initial=0.0)), 1.0)
    simple = not (energies.size > 1 and np.min(np.diff(energies)) <= tol * scale)
    bohr = np.sort([energies[j] - energies[k] for j in range(len(energies)) for k in range(len(energies)) if j != k])
    distinct = not (bohr.size > 1 and np.min(np.diff(bohr)) <= tol * scale)
    return simple, simple and distinct


def gen_holds(h: np.ndarray, tol: float | None = None) -> bool:
    """Simple spectrum and pairwise distinct Bohr frequencies."""
    _, distinct = level_diagnostics(np.linalg.eigvalsh(h), tol)
    return distinct


def _simple_qrm_eigen(q: SimpleQrm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    energies, vectors = eigh_sorted(q.hamiltonian)
    lam = 1j * (energies[:, None] - energies[None, :]) + q.gamma_total
    return energies, vectors, lam


def simple_qrm_solve(q: SimpleQrm, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) in closed form in the eigenbasis of H.

    rho_jk(t) = e^{-t lam_jk} rho0_jk + tr(rho0) Gamma T_jk / lam_jk (1 - e^{-t lam_jk}),
    lam_jk = i(e_j - e_k) + Gamma. Falls back to expm when Gen fails.
    """
    if rho0.shape != (q.dim, q.dim):
        raise DimensionError(f"initial state of shape {rho0.shape} does not act on dimension {q.dim}")
    if not gen_holds(q.hamiltonian):
        log.warning("Gen does not hold for H (degenerate levels or Bohr frequencies); using expm")
        generator = build_simple_lindbladian(q).matrix
        return devectorize(expm(t * generator) @ vectorize(rho0), q.dim)

    _, vectors, lam = _simple_qrm_eigen(q)
    rho0_e = dagger(vectors) @ rho0 @ vectors
    t_e = dagger(vectors) @ q.t_matrix @ vectors
    decay = np.exp(-t * lam)
    rho_e = decay * rho0_e + np.trace(rho0) * q.gamma_total * t_e / lam * (1.0 - decay)
    return vectors @ rho_e @ dagger(vectors)


def simple_qrm_steady_state(q: SimpleQrm) -> np.ndarray:
    """Gamma (i[H, .] + Gamma)^{-1} T"""
    _, vectors, lam = _simple_qrm_eigen(q)
    t_e = dagger(vectors) @ q.t_matrix @ vectors
    return vectors @ (q.gamma_total * t_e / lam) @ dagger(vectors)
