"""Perturbative steady state and spectrum of L_g = L_0 + g L_1 for small g.

L_1 = -i[H, .]. Everything is organized around the second-order map on C

    Psi(X) = tr_AB [H, S_0([H, X])],

with S_0 the reduced resolvent of L_0 at 0. Its diagonal restriction Phi_D is the
generator of the effective classical dynamics of C.
"""

import logging

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from env_settings import ENV_SETTINGS
from utils.errors import AssumptionError, ConfigError, ResidualError
from utils.linalg import (
    dagger,
    devectorize,
    eigh_sorted,
    frobenius,
    identity,
    kron,
    null_space,
    numeric_rank,
    partial_trace,
    superop_from_map,
    tensor3,
    vectorize,
)
from utils.model import level_diagnostics
from utils.models.perturbative import (
    CoupReport,
    EffectiveHamiltonian,
    EigenvalueCorrection,
    PhiMaps,
    SteadySeries,
    SteadyState,
)
from utils.models.qrm import QrmModel, SuperOp
from utils.spectrum import ReducedResolvent, apply_uncoupled, joint_eigenbasis, kernel_projector

log = logging.getLogger(__name__)


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m), initial=0.0))


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + dagger(m)) / 2


class _Expansion:
    """Shared pieces of the expansion around the kernel of L_0."""

    def __init__(self, model: QrmModel, resolvent: ReducedResolvent | None = None):
        self.model = model
        self.h = model.h_coupling
        self.resolvent = ReducedResolvent(model) if resolvent is None else resolvent

    def commutator(self, x: np.ndarray) -> np.ndarray:
        return self.h @ x - x @ self.h

    def l1(self, x: np.ndarray) -> np.ndarray:
        return -1j * self.commutator(x)

    def lift(self, rho_c: np.ndarray) -> np.ndarray:
        return tensor3(self.model.tau_a, rho_c, self.model.tau_b)

    def psi(self, x: np.ndarray) -> np.ndarray:
        y = self.resolvent.apply(self.commutator(x))
        return partial_trace(self.commutator(y), self.model.shape, "AB")


def h_bar_tau_double_sum(model: QrmModel) -> np.ndarray:
    """sum_jk t^A_j t^B_k <phi^A_j phi^B_k| H |phi^A_j phi^B_k>, an operator on C."""
    n_a, n_c, n_b = model.shape
    _, t_a, v_a = joint_eigenbasis(model.h_a, model.tau_a)
    _, t_b, v_b = joint_eigenbasis(model.h_b, model.tau_b)
    r = model.h_coupling.reshape(n_a, n_c, n_b, n_a, n_c, n_b)
    blocks = np.einsum("aj,bk,acbACB,Aj,Bk->jkcC", v_a.conj(), v_b.conj(), r, v_a, v_b, optimize=True)
    return np.einsum("j,k,jkcC->cC", t_a, t_b, blocks)


def effective_hamiltonians(model: QrmModel) -> EffectiveHamiltonian:
    n_a, n_c, n_b = model.shape
    h = model.h_coupling
    eye_c = identity(n_c)
    h_bar = _hermitian_part(partial_trace(h @ tensor3(model.tau_a, eye_c, model.tau_b), model.shape, "AB"))
    h_bar_a = _hermitian_part(partial_trace(h @ tensor3(model.tau_a, eye_c, identity(n_b)), model.shape, "A"))
    h_bar_b = _hermitian_part(partial_trace(h @ tensor3(identity(n_a), eye_c, model.tau_b), model.shape, "B"))

    deviation = _max_abs(h_bar - h_bar_tau_double_sum(model))
    if deviation > ENV_SETTINGS.residual_tol * max(1.0, _max_abs(h)):
        log.warning(f"H_bar_tau disagrees with its eigenbasis double sum by {deviation:.3e}")

    energies, vectors = eigh_sorted(h_bar)
    simple, distinct = level_diagnostics(energies)
    return EffectiveHamiltonian(
        h_bar_tau=h_bar,
        h_bar_tau_a=h_bar_a,
        h_bar_tau_b=h_bar_b,
        energies=energies,
        vectors=vectors,
        spec_simple=simple,
        distinct_bohr=distinct,
        double_sum_deviation=deviation,
    )


def _numeric_q0_l1_q0(model: QrmModel) -> SuperOp:
    projector = kernel_projector(model)
    h = model.h_coupling

    def sandwich(x: np.ndarray) -> np.ndarray:
        y = projector.apply(x)
        return projector.apply(-1j * (h @ y - y @ h))

    return SuperOp.from_map(sandwich, model.n, label="Q0 L1 Q0")


def q0_l1_q0(model: QrmModel) -> SuperOp:
    """First-order map Q_0 L_1 Q_0 on the kernel of L_0.

    H_C = 0:  X -> -i tau_a (x) [H_bar_tau, tr_AB X] (x) tau_b
    H_C != 0 with a simple spectrum: the zero map.
    """
    if model.h_c_is_zero:
        h_bar = effective_hamiltonians(model).h_bar_tau

        def first_order(x: np.ndarray) -> np.ndarray:
            reduced = partial_trace(x, model.shape, "AB")
            return -1j * tensor3(model.tau_a, h_bar @ reduced - reduced @ h_bar, model.tau_b)

        return SuperOp.from_map(first_order, model.n, label="Q0 L1 Q0")

    simple, _ = level_diagnostics(np.linalg.eigvalsh(model.h_c))
    if not simple:
        raise AssumptionError("Spec(H_C) fails: H_C has a degenerate spectrum")
    numeric = _numeric_q0_l1_q0(model)
    size = _max_abs(numeric.matrix)
    if size > ENV_SETTINGS.residual_tol * max(1.0, _max_abs(model.h_coupling)):
        raise ResidualError(f"Q0 L1 Q0 should vanish when Spec(H_C) holds, found {size:.3e}")
    return SuperOp(dim=model.n, matrix=np.zeros_like(numeric.matrix), label="Q0 L1 Q0")


def q0_l1_q0_deviation(model: QrmModel) -> float:
    """Largest entry of q0_l1_q0 minus the product of projectors and L_1."""
    return float(np.max(np.abs(q0_l1_q0(model).matrix - _numeric_q0_l1_q0(model).matrix)))


def _partial_trace_cb(x: np.ndarray, n_c: int, n_b: int) -> np.ndarray:
    return partial_trace(x, (1, n_c, n_b), "B")


def _partial_trace_ac(x: np.ndarray, n_a: int, n_c: int) -> np.ndarray:
    return partial_trace(x, (n_a, n_c, 1), "A")


def h_operators(model: QrmModel, basis: np.ndarray) -> list[np.ndarray]:
    """h(k) on C for L_0 = D, one per basis vector.

    h(k) = 2/(ga+gb) tr_AB(H X_k H)
         + 2 ga/(gb (ga+gb)) tr_B(H_bar_tau_a (P_k (x) tau_b) H_bar_tau_a)
         + 2 gb/(ga (ga+gb)) tr_A(H_bar_tau_b (tau_a (x) P_k) H_bar_tau_b),
    X_k = tau_a (x) P_k (x) tau_b.
    """
    n_a, n_c, n_b = model.shape
    g_a, g_b = model.gamma_a, model.gamma_b
    eff = effective_hamiltonians(model)
    h = model.h_coupling
    out = []
    for k in range(n_c):
        p_k = np.outer(basis[:, k], basis[:, k].conj())
        direct = partial_trace(h @ tensor3(model.tau_a, p_k, model.tau_b) @ h, model.shape, "AB")
        via_a = _partial_trace_cb(eff.h_bar_tau_a @ kron(p_k, model.tau_b) @ eff.h_bar_tau_a, n_c, n_b)
        via_b = _partial_trace_ac(eff.h_bar_tau_b @ kron(model.tau_a, p_k) @ eff.h_bar_tau_b, n_a, n_c)
        out.append(
            2.0 / (g_a + g_b) * direct
            + 2.0 * g_a / (g_b * (g_a + g_b)) * via_a
            + 2.0 * g_b / (g_a * (g_a + g_b)) * via_b
        )
    return out


def phi_d_from_h(model: QrmModel, basis: np.ndarray) -> np.ndarray:
    """Phi_D[j, k] = <phi_j| h(k) |phi_j> off the diagonal, columns summing to zero."""
    n_c = model.dims.n_c
    phi_d = np.zeros((n_c, n_c))
    for k, h_k in enumerate(h_operators(model, basis)):
        column = np.real(np.einsum("ij,ik,kj->j", basis.conj(), h_k, basis))
        column[k] = 0.0
        phi_d[:, k] = column
        phi_d[k, k] = -column.sum()
    return phi_d


def _diagonal_basis(model: QrmModel, allow_degenerate: bool) -> tuple[np.ndarray, np.ndarray, str]:
    if model.h_c_is_zero:
        eff = effective_hamiltonians(model)
        energies, basis, simple, name = eff.energies, eff.vectors, eff.spec_simple, "h_bar_tau"
    else:
        energies, basis = eigh_sorted(model.h_c)
        simple, _ = level_diagnostics(energies)
        name = "h_c"
    if not simple:
        if not allow_degenerate:
            raise AssumptionError(f"Spec fails: {name} has a degenerate spectrum, the diagonal basis is ambiguous")
        log.warning(f"{name} is degenerate; using an arbitrary eigenbasis for Diag")
    return energies, basis, name


def build_phi(
    model: QrmModel,
    allow_degenerate: bool = False,
    resolvent: ReducedResolvent | None = None,
) -> PhiMaps:
    """Phi(rho_C) = Psi(tau_a (x) rho_C (x) tau_b) and its diagonal block Phi_D.

    Diag is taken in the eigenbasis of H_bar_tau when H_C = 0 and of H_C otherwise.
    """
    n_c = model.dims.n_c
    energies, basis, diag_basis = _diagonal_basis(model, allow_degenerate)
    ex = _Expansion(model, resolvent)
    phi = superop_from_map(lambda rho_c: ex.psi(ex.lift(rho_c)), n_c)

    phi_d = np.zeros((n_c, n_c))
    for k in range(n_c):
        image = devectorize(phi @ vectorize(np.outer(basis[:, k], basis[:, k].conj())), n_c)
        phi_d[:, k] = np.real(np.diag(dagger(basis) @ image @ basis))

    scale = max(1.0, _max_abs(phi_d))
    column_sums = _max_abs(phi_d.sum(axis=0))
    if column_sums > ENV_SETTINGS.residual_tol * scale:
        raise ResidualError(f"Phi_D columns sum to {column_sums:.3e}, expected 0")

    l0_is_dissipator = model.is_undriven
    h_route_deviation = None
    if l0_is_dissipator:
        off_diagonal = phi_d[~np.eye(n_c, dtype=bool)]
        lowest = float(off_diagonal.min(initial=0.0))
        if lowest < -ENV_SETTINGS.residual_tol * scale:
            raise ResidualError(f"Phi_D has a negative off-diagonal entry {lowest:.3e}")
        h_route_deviation = _max_abs(phi_d_from_h(model, basis) - phi_d)
        if h_route_deviation > ENV_SETTINGS.residual_tol * scale:
            raise ResidualError(f"Phi_D disagrees with the h(k) route by {h_route_deviation:.3e}")
        log.debug(f"Phi_D matches the h(k) route to {h_route_deviation:.3e}")

    return PhiMaps(
        phi=phi,
        phi_d=phi_d,
        basis=basis,
        energies=energies,
        diag_basis=diag_basis,
        l0_is_dissipator=l0_is_dissipator,
        h_route_deviation=h_route_deviation,
    )


def _normalized_kernel(phi_d: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    vectors = null_space(phi_d, tol)
    v = vectors[:, 0]
    pivot = v[np.argmax(np.abs(v))]
    v = np.real(v * np.conj(pivot) / abs(pivot))
    total = v.sum()
    if abs(total) <= tol:
        log.warning("kernel vector of Phi_D sums to zero; normalizing by its largest entry")
        return v / np.max(np.abs(v)), 0.0
    v = v / total
    lowest = float(v.min())
    clamped = 0.0
    if lowest < 0.0:
        if lowest >= -ENV_SETTINGS.clamp_tol:
            clamped = -lowest
            v = np.clip(v, 0.0, None)
            v = v / v.sum()
            log.debug(f"clamped kernel entries down to {lowest:.3e}")
        else:
            log.warning(f"kernel of Phi_D has a negative entry {lowest:.3e}")
    return v, clamped


def _closed_classes(adjacency: np.ndarray) -> int:
    n_classes, labels = connected_components(csr_matrix(adjacency), directed=True, connection="strong")
    closed = 0
    for c in range(n_classes):
        members = labels == c
        if not adjacency[np.ix_(members, ~members)].any():
            closed += 1
    return closed


def check_coup_matrix(phi_d: np.ndarray, combinatorial: bool = True, tol: float | None = None) -> CoupReport:
    """Coup: dim ker Phi_D = 1, with the kernel normalized to a probability vector.

    When Phi_D is a rate matrix (combinatorial=True) the rank criterion is compared
    with the graph one: a single closed communicating class of the jump chain.
    """
    tol = ENV_SETTINGS.null_tol if tol is None else tol
    phi_d = np.asarray(phi_d, dtype=float)
    n = phi_d.shape[0]
    rank = numeric_rank(phi_d, tol)
    holds = rank == n - 1
    kernel, clamped = _normalized_kernel(phi_d, tol)
    zero_components = [int(j) for j in np.flatnonzero(np.abs(kernel) <= tol)]

    witness = None
    closed = None
    combinatorial_holds = None
    agree = None
    if combinatorial:
        edge_tol = tol * _max_abs(phi_d)
        # adjacency[i, j]: jump i -> j has a positive rate
        adjacency = phi_d.T > edge_tol
        np.fill_diagonal(adjacency, False)
        closed = _closed_classes(adjacency)
        combinatorial_holds = closed == 1
        agree = combinatorial_holds == holds
        if not agree:
            log.warning(f"rank criterion ({holds}) and closed-class criterion ({combinatorial_holds}) disagree")
        for j in range(n):
            if all(phi_d[j, k] > edge_tol for k in range(n) if k != j):
                witness = j
                break

    return CoupReport(
        holds=holds,
        rank=rank,
        n=n,
        kernel=kernel,
        witness=witness,
        closed_classes=closed,
        combinatorial_holds=combinatorial_holds,
        criteria_agree=agree,
        zero_components=zero_components,
        clamped=clamped,
    )


def check_coup(phi: PhiMaps) -> CoupReport:
    return check_coup_matrix(phi.phi_d, combinatorial=phi.l0_is_dissipator)


def _solve_diagonal(phi_d: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y with Phi_D y = -b and sum(y) = 0."""
    n = len(b)
    a = np.vstack([phi_d, np.ones((1, n))]).astype(complex)
    rhs = np.concatenate([-b, [0.0]]).astype(complex)
    y, *_ = scipy.linalg.lstsq(a, rhs)
    residual = float(np.linalg.norm(a @ y - rhs))
    if residual > ENV_SETTINGS.residual_tol * max(1.0, float(np.linalg.norm(b))):
        raise ResidualError(f"Phi_D inverted off its range (residual {residual:.3e})")
    return y


def _next_order(ex: _Expansion, phi: PhiMaps, prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(R_j, r_j) from rho_{j-1}."""
    basis = phi.basis
    piece = 1j * ex.resolvent.apply(ex.commutator(prev))
    off = np.zeros((phi.n, phi.n), dtype=complex)
    if phi.diag_basis == "h_bar_tau":
        psi_prev = dagger(basis) @ ex.psi(prev) @ basis
        gaps = phi.energies[:, None] - phi.energies[None, :]
        mask = ~np.eye(phi.n, dtype=bool)
        off[mask] = -1j * psi_prev[mask] / gaps[mask]
    off_op = basis @ off @ dagger(basis)
    b = phi.diagonal_of(ex.psi(piece + ex.lift(off_op)))
    return piece, off_op + phi.diagonal_operator(_solve_diagonal(phi.phi_d, b))


def _iterate(ex: _Expansion, phi: PhiMaps, x: np.ndarray) -> np.ndarray:
    piece, r = _next_order(ex, phi, x)
    return piece + ex.lift(r)


def _radius(r_map: np.ndarray) -> float | None:
    mu = float(np.max(np.abs(scipy.linalg.eigvals(r_map))))
    return None if mu <= ENV_SETTINGS.herm_tol else 1.0 / mu


def steady_state_series(model: QrmModel, order: int | None = None, with_map: bool = True) -> SteadySeries:
    """Coefficients rho_0..rho_K of the steady state of L_g in powers of g.

    rho_0 = tau_a (x) r_0 (x) tau_b with r_0 spanning ker Phi_D, and
    rho_j = R_j + tau_a (x) r_j (x) tau_b, R_j = i S_0([H, rho_{j-1}]).
    """
    order = ENV_SETTINGS.series_order if order is None else order
    if order < 0:
        raise ConfigError(f"series order must be non-negative, got {order}")

    ex = _Expansion(model)
    phi = build_phi(model, resolvent=ex.resolvent)
    coup = check_coup(phi)
    if not coup.holds:
        raise AssumptionError(f"Coup fails: rank Phi_D = {coup.rank}, need {coup.n - 1}")

    r0 = phi.diagonal_operator(coup.kernel)
    coefficients = [ex.lift(r0)]
    r_c = [r0]
    pieces: list[np.ndarray] = []
    residuals: list[float] = []
    h_scale = max(1.0, _max_abs(model.h_coupling))

    for j in range(1, order + 1):
        prev = coefficients[-1]
        prev_scale = max(1.0, frobenius(prev))
        leftover = _max_abs(phi.diagonal_of(ex.psi(prev)))
        if leftover > ENV_SETTINGS.residual_tol * prev_scale * h_scale**2:
            raise ResidualError(f"order {j}: Diag Psi(rho_{j - 1}) = {leftover:.3e}, expected 0")

        piece, r_j = _next_order(ex, phi, prev)
        rho_j = piece + ex.lift(r_j)

        skew = _max_abs(rho_j - dagger(rho_j))
        if skew > 1e-8 * max(1.0, frobenius(rho_j)):
            raise ResidualError(f"order {j}: coefficient is not Hermitian ({skew:.3e})")
        rho_j = _hermitian_part(rho_j)

        residual = frobenius(apply_uncoupled(model, rho_j) + ex.l1(prev))
        if residual > ENV_SETTINGS.residual_tol * prev_scale * h_scale:
            raise ResidualError(f"order {j}: hierarchy residual {residual:.3e}")
        log.debug(f"order {j}: |rho_j| = {frobenius(rho_j):.3e}, residual {residual:.3e}")

        coefficients.append(rho_j)
        r_c.append(_hermitian_part(r_j))
        pieces.append(piece)
        residuals.append(residual)

    r_map = None
    g0 = None
    if with_map:
        r_map = superop_from_map(lambda x: _iterate(ex, phi, x), model.n)
        g0 = _radius(r_map)
        log.info(f"series radius estimate g0 = {g0 if g0 is not None else 'unbounded'}")

    return SteadySeries(
        order=order,
        branch=phi.diag_basis,
        coefficients=coefficients,
        r_c=r_c,
        pieces=pieces,
        hierarchy_residuals=residuals,
        g0=g0,
        r_map=r_map,
    )


def apply_lindbladian(model: QrmModel, rho: np.ndarray, g: float | None = None) -> np.ndarray:
    g = model.g if g is None else g
    h = model.h_coupling
    return apply_uncoupled(model, rho) - 1j * g * (h @ rho - rho @ h)


def resolvent_steady_state(model: QrmModel, g: float | None = None) -> SteadyState:
    """rho(g) = (I - g R)^{-1} rho_0, normalized to unit trace."""
    g = model.g if g is None else g
    series = steady_state_series(model, order=0, with_map=True)
    rho0 = series.coefficients[0]
    if series.g0 is not None and abs(g) >= series.g0:
        log.warning(f"g = {g} is outside the estimated radius g0 = {series.g0:.4g}; solving anyway")

    size = model.n * model.n
    try:
        solution = scipy.linalg.solve(np.eye(size) - g * series.r_map, vectorize(rho0))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise ResidualError(f"I - g R is singular at g = {g}: {e}") from e
    rho = devectorize(solution, model.n)
    rho = _hermitian_part(rho / np.trace(rho))
    residual = frobenius(apply_lindbladian(model, rho, g))
    return SteadyState(g=g, rho=rho, residual=residual, method="resolvent", g0=series.g0)


def series_steady_state(series: SteadySeries, model: QrmModel, g: float, order: int | None = None) -> SteadyState:
    rho = series.evaluate(g, order)
    rho = _hermitian_part(rho / np.trace(rho))
    residual = frobenius(apply_lindbladian(model, rho, g))
    return SteadyState(
        g=g,
        rho=rho,
        residual=residual,
        method="series",
        g0=series.g0,
        order=series.order if order is None else min(order, series.order),
    )


def second_order_eigenvalues(model: QrmModel) -> list[EigenvalueCorrection]:
    """g^2 corrections to the eigenvalues -i g (e_j - e_k) of the 0-group, j != k.

    value = tr((I (x) |phi_k><phi_j| (x) I) [H, S_0([H, tau_a (x) |phi_j><phi_k| (x) tau_b])])
    Re value <= 0. For L_0 = D each correction also records the quadratic bound
    -(ga^2 + ga gb + gb^2)/(ga gb (ga + gb)) (e_j - e_k)^2, which some undriven models exceed.
    """
    if not model.h_c_is_zero:
        raise AssumptionError("second-order eigenvalue corrections need H_C = 0")
    eff = effective_hamiltonians(model)
    if not eff.spec_simple:
        raise AssumptionError("Spec(H_bar_tau) fails: degenerate spectrum")
    if not eff.distinct_bohr:
        log.warning("Bohr frequencies of H_bar_tau coincide; corrections sharing a frequency may mix")

    g_a, g_b = model.gamma_a, model.gamma_b
    kappa = (g_a**2 + g_a * g_b + g_b**2) / (g_a * g_b * (g_a + g_b))
    ex = _Expansion(model)
    basis, energies = eff.vectors, eff.energies
    corrections = []
    for j in range(len(energies)):
        for k in range(len(energies)):
            if j == k:
                continue
            image = ex.psi(ex.lift(np.outer(basis[:, j], basis[:, k].conj())))
            value = complex(basis[:, j].conj() @ image @ basis[:, k])
            bohr = float(energies[j] - energies[k])
            bound = -kappa * bohr**2
            satisfies = value.real <= bound + ENV_SETTINGS.residual_tol * max(1.0, abs(bound))
            if model.is_undriven and not satisfies:
                log.info(f"correction ({j},{k}) = {value:.6g} exceeds the quadratic bound {bound:.6g}")
            corrections.append(
                EigenvalueCorrection(
                    j=j,
                    k=k,
                    value=value,
                    bohr=bohr,
                    bound=bound,
                    satisfies_bound=satisfies,
                    bound_applies=model.is_undriven,
                )
            )
    return corrections
