"""Analytic spectrum of the uncoupled generator L_0 = -i[H_0, .] + D."""

import logging

import numpy as np
import scipy.linalg

from env_settings import ENV_SETTINGS
from utils.errors import AssumptionError, ModelInvariantError
from utils.linalg import (
    basis_operator,
    dagger,
    eigh_sorted,
    partial_trace,
    superop_from_map,
    tensor3,
)
from utils.model import apply_dissipator, build_dissipator, build_uncoupled, reset_a, reset_ab, reset_b, uncoupled_hamiltonian
from utils.models.qrm import QrmModel, SuperOp
from utils.models.spectral import DissipatorProjectors, EigenTableEntry, SpectralDecomp

log = logging.getLogger(__name__)


def dissipator_projectors(model: QrmModel) -> DissipatorProjectors:
    """Q_0 = P_a P_b, Q_A = P_b - Q_0, Q_B = P_a - Q_0, Q_AB = I - P_a - P_b + Q_0.

    P_a(rho) = tau_a (x) tr_A rho and P_b(rho) = tr_B rho (x) tau_b.
    """
    n = model.n
    p_a = superop_from_map(lambda rho: reset_a(model, rho), n)
    p_b = superop_from_map(lambda rho: reset_b(model, rho), n)
    q0 = superop_from_map(lambda rho: reset_ab(model, rho), n)
    eye = np.eye(n * n, dtype=complex)
    return DissipatorProjectors(
        q0=SuperOp(dim=n, matrix=q0, label="Q0"),
        qa=SuperOp(dim=n, matrix=p_b - q0, label="QA"),
        qb=SuperOp(dim=n, matrix=p_a - q0, label="QB"),
        qab=SuperOp(dim=n, matrix=eye - p_a - p_b + q0, label="QAB"),
    )


def dissipator_spectral_decomposition(model: QrmModel) -> SpectralDecomp:
    """Spectral decomposition of D, merging Q_A and Q_B when gamma_a = gamma_b."""
    q = dissipator_projectors(model)
    g_a, g_b = model.gamma_a, model.gamma_b
    if abs(g_a - g_b) <= ENV_SETTINGS.spectral_tol * max(g_a, g_b):
        merged = SuperOp(dim=model.n, matrix=q.qa.matrix + q.qb.matrix, label="QA+QB")
        return SpectralDecomp(
            eigenvalues=[0.0, -g_a, -(g_a + g_b)],
            projectors=[q.q0, merged, q.qab],
            semisimple=[True, True, True],
            labels=["Q0", "A+B", "AB"],
        )
    return SpectralDecomp(
        eigenvalues=[0.0, -g_a, -g_b, -(g_a + g_b)],
        projectors=q.as_list(),
        semisimple=[True] * 4,
        labels=["Q0", "A", "B", "AB"],
    )


def joint_eigenbasis(h: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Common eigenbasis of a commuting pair (h, tau).

    Returns (energies, weights, vectors). When h = 0 the eigenbasis of tau is used;
    otherwise tau is diagonalized inside each degenerate eigenspace of h.
    """
    tol = ENV_SETTINGS.herm_tol
    if np.max(np.abs(h @ tau - tau @ h), initial=0.0) > tol:
        raise ModelInvariantError("Hamiltonian and reset state do not commute")
    n = h.shape[0]
    if np.max(np.abs(h), initial=0.0) <= tol:
        weights, vectors = eigh_sorted(tau)
        return np.zeros(n), weights, vectors

    energies, vectors = eigh_sorted(h)
    scale = max(float(np.max(np.abs(energies))), 1.0)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[start] <= ENV_SETTINGS.gap_tol * scale:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            _, rotation = eigh_sorted(dagger(block) @ tau @ block)
            vectors[:, start:stop] = block @ rotation
        start = stop
    weights = np.real(np.einsum("ij,jk,ki->i", dagger(vectors), tau, vectors))
    return energies, weights, vectors


def _factor_elements(energies: np.ndarray, tau: np.ndarray, vectors: np.ndarray, include_tau: bool):
    """(kind, index pair, operator, frequency, traceless) for one factor.

    Elements are tau, Delta_j = P_j - P_{j+1} and P_jk (j != k); on C every P_jk is used.
    """
    n = vectors.shape[0]
    projector = lambda j, k: np.outer(vectors[:, j], vectors[:, k].conj())  # noqa: E731
    if not include_tau:
        for j in range(n):
            for k in range(n):
                yield "offdiag", (j, k), projector(j, k), energies[j] - energies[k], False
        return
    yield "tau", (-1, -1), tau, 0.0, False
    for j in range(n - 1):
        yield "diag", (j, j + 1), projector(j, j) - projector(j + 1, j + 1), 0.0, True
    for j in range(n):
        for k in range(n):
            if j != k:
                yield "offdiag", (j, k), projector(j, k), energies[j] - energies[k], True


def apply_uncoupled(model: QrmModel, rho: np.ndarray) -> np.ndarray:
    h0 = uncoupled_hamiltonian(model)
    return -1j * (h0 @ rho - rho @ h0) + apply_dissipator(model, rho)


def uncoupled_eigentable(model: QrmModel) -> list[EigenTableEntry]:
    """All (n_a n_c n_b)^2 eigenvectors of L_0 as product operators.

    The eigenvalue of a (x) c (x) b is -i(sum of Bohr frequencies) - gamma_a [a traceless]
    - gamma_b [b traceless].
    """
    e_a, _, v_a = joint_eigenbasis(model.h_a, model.tau_a)
    e_b, _, v_b = joint_eigenbasis(model.h_b, model.tau_b)
    e_c, v_c = eigh_sorted(model.h_c) if not model.h_c_is_zero else (np.zeros(model.dims.n_c), np.eye(model.dims.n_c, dtype=complex))

    a_elements = list(_factor_elements(e_a, model.tau_a, v_a, include_tau=True))
    c_elements = list(_factor_elements(e_c, None, v_c, include_tau=False))
    b_elements = list(_factor_elements(e_b, model.tau_b, v_b, include_tau=True))

    table: list[EigenTableEntry] = []
    for a_kind, a_index, a_op, a_freq, a_traceless in a_elements:
        for _, c_pair, c_op, c_freq, _ in c_elements:
            for b_kind, b_index, b_op, b_freq, b_traceless in b_elements:
                family = {
                    (False, False): "Q0",
                    (True, False): "A",
                    (False, True): "B",
                    (True, True): "AB",
                }[(a_traceless, b_traceless)]
                eigenvalue = (
                    -1j * (a_freq + c_freq + b_freq)
                    - model.gamma_a * a_traceless
                    - model.gamma_b * b_traceless
                )
                vector = tensor3(a_op, c_op, b_op)
                residual = np.linalg.norm(apply_uncoupled(model, vector) - eigenvalue * vector) / np.linalg.norm(vector)
                table.append(
                    EigenTableEntry(
                        eigenvalue=complex(eigenvalue),
                        eigenvector=vector,
                        family=family,
                        a_kind=a_kind,
                        c_pair=c_pair,
                        b_kind=b_kind,
                        a_index=a_index,
                        b_index=b_index,
                        residual=float(residual),
                    )
                )

    worst = max(entry.residual for entry in table)
    if worst > 1e-10:
        log.warning(f"eigentable: largest residual {worst:.2e}")
    return table


def eigentable_condition(table: list[EigenTableEntry]) -> tuple[int, float]:
    """Rank and condition number of the vectorized table eigenvectors."""
    basis = np.column_stack([entry.eigenvector.reshape(-1, order="F") for entry in table])
    singular = scipy.linalg.svdvals(basis)
    rank = int(np.sum(singular > ENV_SETTINGS.null_tol * singular[0]))
    return rank, float(singular[0] / singular[-1])


def rank_one_projectors(tau: np.ndarray, basis: np.ndarray) -> list[SuperOp]:
    """Complete family of rank-one projectors on B(C^n) attached to tau.

    Q_jk(X) = P_jk tr(P_jk^* X), Q_j(X) = Delta_j tr(sigma_j (X - tau tr X)),
    Q_0(X) = tau tr X, with sigma_j = P_1 + ... + P_j.
    """
    n = tau.shape[0]
    in_basis = dagger(basis) @ tau @ basis
    if np.max(np.abs(in_basis - np.diag(np.diag(in_basis))), initial=0.0) > ENV_SETTINGS.herm_tol:
        raise ModelInvariantError("tau is not diagonal in the supplied basis")

    def p(j: int, k: int) -> np.ndarray:
        return np.outer(basis[:, j], basis[:, k].conj())

    projectors = [SuperOp.from_map(lambda x: tau * np.trace(x), n, label="Q0")]
    for j in range(n - 1):
        delta = p(j, j) - p(j + 1, j + 1)
        sigma = sum(p(k, k) for k in range(j + 1))
        projectors.append(
            SuperOp.from_map(
                lambda x, delta=delta, sigma=sigma: delta * np.trace(sigma @ (x - tau * np.trace(x))),
                n,
                label=f"Q{j + 1}",
            )
        )
    for j in range(n):
        for k in range(n):
            if j != k:
                pjk = p(j, k)
                projectors.append(
                    SuperOp.from_map(
                        lambda x, pjk=pjk: pjk * np.trace(dagger(pjk) @ x),
                        n,
                        label=f"Q{j + 1}{k + 1}",
                    )
                )
    return projectors


def dissipator_inverse(model: QrmModel, rho_tilde: np.ndarray, tol: float | None = None) -> np.ndarray:
    """D^{-1} on operators with tr_AB = 0.

    D^{-1}(x) = -1/(gamma_a + gamma_b) {x + (gamma_a/gamma_b) tau_a (x) tr_A x
                                          + (gamma_b/gamma_a) tr_B x (x) tau_b}
    """
    tol = ENV_SETTINGS.null_tol if tol is None else tol
    g_a, g_b = model.gamma_a, model.gamma_b
    reduced = partial_trace(rho_tilde, model.shape, "AB")
    scale = max(float(np.max(np.abs(rho_tilde), initial=0.0)), 1.0)
    if np.max(np.abs(reduced), initial=0.0) > tol * scale:
        raise ValueError("dissipator_inverse needs tr_AB(rho) = 0")
    return -(
        rho_tilde
        + (g_a / g_b) * reset_a(model, rho_tilde)
        + (g_b / g_a) * reset_b(model, rho_tilde)
    ) / (g_a + g_b)


def restricted_inverse(generator: SuperOp, projector: SuperOp) -> SuperOp:
    """Inverse of the generator on ran(I - P), extended by 0 on ran(P).

    Works in an orthonormal basis U of ran(I - P): with L U = U M, returns U M^{-1} U^+.
    """
    size = generator.matrix.shape[0]
    complement = np.eye(size, dtype=complex) - projector.matrix
    u = scipy.linalg.orth(complement, rcond=ENV_SETTINGS.null_tol)
    u_pinv = np.linalg.pinv(u)
    restricted = u_pinv @ generator.matrix @ u
    inverse = u @ np.linalg.solve(restricted, u_pinv @ complement)
    return SuperOp(dim=generator.dim, matrix=inverse, label="restricted-inverse")


def pinching_projector(model: QrmModel) -> np.ndarray:
    """Projector on B(H_C) onto the commutant of H_C, as an n_c^2 x n_c^2 matrix."""
    n_c = model.dims.n_c
    if model.h_c_is_zero:
        return np.eye(n_c * n_c, dtype=complex)
    energies, vectors = eigh_sorted(model.h_c)
    scale = max(float(np.max(np.abs(energies))), 1.0)
    same = np.abs(energies[:, None] - energies[None, :]) <= ENV_SETTINGS.gap_tol * scale

    def pinch(x: np.ndarray) -> np.ndarray:
        return vectors @ ((dagger(vectors) @ x @ vectors) * same) @ dagger(vectors)

    return superop_from_map(pinch, n_c)


def kernel_projector(model: QrmModel) -> SuperOp:
    """Spectral projector of L_0 for the eigenvalue 0: tau_a (x) Pi(tr_AB .) (x) tau_b."""
    pinch = pinching_projector(model)
    n_c = model.dims.n_c

    def project(rho: np.ndarray) -> np.ndarray:
        reduced = partial_trace(rho, model.shape, "AB")
        pinched = (pinch @ reduced.reshape(-1, order="F")).reshape(n_c, n_c, order="F")
        return tensor3(model.tau_a, pinched, model.tau_b)

    return SuperOp.from_map(project, model.n, label="Q0(L0)")


class ReducedResolvent:
    """S_0 = L_0^{-1}(I - Q_0), with Q_0 the spectral projector of L_0 at 0.

    Uses the closed-form D^{-1} when L_0 = D and a dense solve otherwise.
    """

    def __init__(self, model: QrmModel):
        self.model = model
        self.closed_form = model.is_undriven
        self.q0 = kernel_projector(model)
        self._matrix: np.ndarray | None = None
        if not self.closed_form:
            l0 = build_uncoupled(model).matrix
            size = l0.shape[0]
            try:
                self._matrix = np.linalg.solve(l0 + self.q0.matrix, np.eye(size) - self.q0.matrix)
            except np.linalg.LinAlgError as e:
                raise AssumptionError(f"L_0 + Q_0 is singular: {e}") from e

    def project_out(self, x: np.ndarray) -> np.ndarray:
        return x - self.q0.apply(x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.closed_form:
            return dissipator_inverse(self.model, self.project_out(x))
        n = self.model.n
        return (self._matrix @ x.reshape(-1, order="F")).reshape(n, n, order="F")

    def as_superop(self) -> SuperOp:
        if self._matrix is not None:
            return SuperOp(dim=self.model.n, matrix=self._matrix, label="S0")
        return SuperOp.from_map(self.apply, self.model.n, label="S0")


def reduced_resolvent(model: QrmModel) -> ReducedResolvent:
    return ReducedResolvent(model)


def dissipator_inverse_deviation(model: QrmModel) -> float:
    """Largest entry of closed-form D^{-1} minus the restricted inverse of D on ker Q_0."""
    q0 = dissipator_projectors(model).q0
    closed = SuperOp.from_map(lambda x: dissipator_inverse(model, x - q0.apply(x)), model.n)
    restricted = restricted_inverse(build_dissipator(model), q0)
    return float(np.max(np.abs(closed.matrix - restricted.matrix)))
