"""Propagation by e^{t L_g} and the reduced description on the g^2 t time scale.

For t >= 1/g^2 the exact state is close to
    tau_a (x) sum_j [e^{t g^2 Phi_D} p_0]_j P_j (x) tau_b,   p_0 = Diag tr_AB rho_0,
up to O(g) and decaying terms.
"""

import logging

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, linear_sum_assignment
from scipy.stats import linregress

from env_settings import ENV_SETTINGS
from utils.errors import AssumptionError, ConfigError, ModelInvariantError, ResidualError
from utils.linalg import devectorize, eigh_sorted, expm, null_space, partial_trace, tensor3, vectorize
from utils.model import build_lindbladian, build_uncoupled
from utils.models.perturbative import PhiMaps
from utils.models.qrm import QrmModel, check_density
from utils.models.trajectory import (
    ApproachReport,
    ErrorScalingReport,
    NormName,
    PropagationResult,
    ScalingFit,
    SecondOrderFit,
    SpectralGapReport,
    TrackedEigenvalue,
    operator_norm,
)
from utils.perturbation import build_phi, check_coup, second_order_eigenvalues
from utils.spectrum import kernel_projector

log = logging.getLogger(__name__)


def _initial_state(model: QrmModel, rho0: np.ndarray) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (model.n, model.n):
        raise ModelInvariantError(f"initial state of shape {rho0.shape} does not act on dimension {model.n}")
    try:
        check_density(rho0, "rho0")
    except ValueError as e:
        raise ModelInvariantError(str(e)) from e
    return rho0


def _time_grid(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise ConfigError("time grid must be a non-empty 1-d sequence")
    if np.any(times < 0):
        raise ConfigError("times must be non-negative")
    return times


def _hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def propagate_exact(model: QrmModel, rho0: np.ndarray, times, g: float | None = None) -> PropagationResult:
    g = model.g if g is None else g
    rho0 = _initial_state(model, rho0)
    times = _time_grid(times)
    generator = build_lindbladian(model, g).matrix
    v0 = vectorize(rho0)
    states = [devectorize(expm(t * generator) @ v0, model.n) for t in times]
    return PropagationResult(method="exact", g=g, times=times, states=states)


def propagate_ode(
    model: QrmModel,
    rho0: np.ndarray,
    times,
    g: float | None = None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> PropagationResult:
    """Dense ODE integration of d/dt vec(rho) = L_g vec(rho), an independent check on expm."""
    g = model.g if g is None else g
    rho0 = _initial_state(model, rho0)
    times = _time_grid(times)
    generator = build_lindbladian(model, g).matrix
    solution = solve_ivp(
        lambda _, y: generator @ y,
        (0.0, float(times[-1])),
        vectorize(rho0),
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise ResidualError(f"ODE integration failed: {solution.message}")
    states = [devectorize(solution.y[:, i], model.n) for i in range(len(times))]
    return PropagationResult(method="ode", g=g, times=times, states=states)


def _coupled_phi(model: QrmModel, phi: PhiMaps | None) -> PhiMaps:
    phi = build_phi(model) if phi is None else phi
    coup = check_coup(phi)
    if not coup.holds:
        raise AssumptionError(f"Coup fails: rank Phi_D = {coup.rank}, need {coup.n - 1}")
    return phi


def propagate_reduced(
    model: QrmModel,
    rho0: np.ndarray,
    times,
    g: float | None = None,
    phi: PhiMaps | None = None,
) -> PropagationResult:
    """tau_a (x) e^{t g^2 Phi_D} Diag tr_AB(rho_0) (x) tau_b"""
    g = model.g if g is None else g
    rho0 = _initial_state(model, rho0)
    times = _time_grid(times)
    phi = _coupled_phi(model, phi)
    p0 = phi.diagonal_of(partial_trace(rho0, model.shape, "AB"))
    states = []
    for t in times:
        p = expm(t * g * g * phi.phi_d) @ p0
        states.append(tensor3(model.tau_a, phi.diagonal_operator(p), model.tau_b))
    return PropagationResult(method="reduced", g=g, times=times, states=states)


def kernel_dimension(model: QrmModel) -> int:
    """dim ker L_0: n_c^2 when H_C = 0, the size of the commutant of H_C otherwise."""
    return int(round(np.trace(kernel_projector(model).matrix).real))


def propagate_steady_projector(
    model: QrmModel,
    rho0: np.ndarray,
    times,
    g: float | None = None,
) -> PropagationResult:
    """e^{t L_g} Q_0(g) rho_0, with Q_0(g) the spectral projector on the eigenvalues born at 0."""
    g = model.g if g is None else g
    rho0 = _initial_state(model, rho0)
    times = _time_grid(times)
    values, vectors = scipy.linalg.eig(build_lindbladian(model, g).matrix)
    group = np.argsort(np.abs(values.real))[: kernel_dimension(model)]
    condition = np.linalg.cond(vectors)
    if condition > 1e8:
        log.warning(f"eigenvectors of L_g are ill-conditioned ({condition:.2e}); projector may be inaccurate")
    left = np.linalg.inv(vectors)[group, :]
    coefficients = left @ vectorize(rho0)
    states = [
        devectorize(vectors[:, group] @ (np.exp(t * values[group]) * coefficients), model.n)
        for t in times
    ]
    return PropagationResult(method="steady-projector", g=g, times=times, states=states)


def exact_steady_state(model: QrmModel, g: float | None = None) -> np.ndarray:
    """Unique normalized element of ker L_g."""
    g = model.g if g is None else g
    kernel = null_space(build_lindbladian(model, g).matrix)
    if kernel.shape[1] != 1:
        raise AssumptionError(f"ker L_g has dimension {kernel.shape[1]} at g = {g}")
    rho = devectorize(kernel[:, 0], model.n)
    return _hermitian_part(rho / np.trace(rho))


def uncoupled_decay(model: QrmModel, rho0: np.ndarray, times) -> np.ndarray:
    """|e^{t L_0} rho_0 - tau_a (x) e^{-i t H_C} tr_AB(rho_0) e^{i t H_C} (x) tau_b| per time."""
    rho0 = _initial_state(model, rho0)
    times = _time_grid(times)
    generator = build_uncoupled(model).matrix
    reduced = partial_trace(rho0, model.shape, "AB")
    energies, vectors = eigh_sorted(model.h_c)
    out = []
    for t in times:
        state = devectorize(expm(t * generator) @ vectorize(rho0), model.n)
        rotation = vectors @ np.diag(np.exp(-1j * t * energies)) @ vectors.conj().T
        target = tensor3(model.tau_a, rotation @ reduced @ rotation.conj().T, model.tau_b)
        out.append(operator_norm(state - target))
    return np.array(out)


def loglog_fit(x, y) -> ScalingFit:
    """Least squares line through (log x, log y)."""
    result = linregress(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))
    return ScalingFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        stderr=float(result.stderr),
        r_value=float(result.rvalue),
    )


def error_scaling_sweep(
    model: QrmModel,
    rho0: np.ndarray,
    g_list,
    horizon: tuple[float, float] = (1.0, 5.0),
    n_times: int = 12,
    norm: NormName = "fro",
) -> ErrorScalingReport:
    """Exact versus reduced propagation on t in [horizon[0]/g^2, horizon[1]/g^2]."""
    g_values = np.asarray(g_list, dtype=float)
    if g_values.size == 0 or np.any(g_values <= 0):
        raise ConfigError("g values must be positive")
    if not 0 < horizon[0] < horizon[1]:
        raise ConfigError(f"horizon must satisfy 0 < start < stop, got {horizon}")
    phi = _coupled_phi(model, None)

    times, errors, dist = [], [], []
    for g in g_values:
        grid = np.geomspace(horizon[0] / g**2, horizon[1] / g**2, n_times)
        exact = propagate_exact(model, rho0, grid, g)
        reduced = propagate_reduced(model, rho0, grid, g, phi)
        steady = exact_steady_state(model, g)
        times.append(grid)
        errors.append(exact.distances(reduced, norm))
        dist.append([operator_norm(s - steady, norm) for s in exact.states])
        log.info(f"g = {g:.4g}: max error {np.max(errors[-1]):.3e}")

    max_errors = np.max(np.array(errors), axis=1)
    noise_floor = bool(np.max(max_errors) < 1e-10)
    fit = None
    if noise_floor:
        log.info("errors are at the noise floor; no exponent fitted")
    elif g_values.size >= 2:
        fit = loglog_fit(g_values, max_errors)
        log.info(f"max error ~ g^{fit.slope:.3f} (+/- {fit.stderr:.3f}), predicted g^1")

    return ErrorScalingReport(
        g_values=g_values,
        times=np.array(times),
        errors=np.array(errors),
        dist_to_steady=np.array(dist),
        norm=norm,
        max_errors=max_errors,
        fit=fit,
        noise_floor=noise_floor,
    )


def approach_time(
    model: QrmModel,
    rho0: np.ndarray,
    g: float,
    threshold: float = 1e-3,
    norm: NormName = "fro",
) -> float:
    """First t with |rho(t) - rho_inf| <= threshold |rho_0 - rho_inf|, by bracketing and brentq."""
    rho0 = _initial_state(model, rho0)
    steady = exact_steady_state(model, g)
    generator = build_lindbladian(model, g).matrix
    v0 = vectorize(rho0)
    initial = operator_norm(rho0 - steady, norm)
    if initial <= ENV_SETTINGS.residual_tol:
        return 0.0

    def excess(t: float) -> float:
        state = devectorize(expm(t * generator) @ v0, model.n)
        return operator_norm(state - steady, norm) / initial - threshold

    lo, hi = 0.0, 1.0 / g**2
    for _ in range(60):
        if excess(hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ResidualError(f"state did not approach the steady state within t = {hi:.3e}")
    return float(brentq(excess, lo, hi, xtol=1e-8 * hi))


def approach_time_scaling(model: QrmModel, rho0: np.ndarray, g_list, threshold: float = 1e-3) -> ApproachReport:
    g_values = [float(g) for g in g_list]
    times = [approach_time(model, rho0, g, threshold) for g in g_values]
    fit = loglog_fit(g_values, times) if len(g_values) >= 2 else None
    if fit is not None:
        log.info(f"approach time ~ g^{fit.slope:.3f}, predicted g^-2")
    return ApproachReport(g_values=g_values, threshold=threshold, approach_times=times, fit=fit)


def phi_d_rates(phi: PhiMaps) -> tuple[float, float]:
    """(delta, F): smallest and largest |Re| over the nonzero spectrum of Phi_D."""
    real = np.sort(np.abs(scipy.linalg.eigvals(phi.phi_d).real))
    nonzero = real[1:]
    if nonzero.size == 0:
        return 0.0, 0.0
    return float(nonzero[0]), float(real[-1])


def fit_decay_rate(model: QrmModel, rho0: np.ndarray, g: float, n_times: int = 16) -> float:
    """delta with |rho(t) - rho_inf| ~ C e^{-delta g^2 t} on the tail of the trajectory."""
    phi = _coupled_phi(model, None)
    predicted, _ = phi_d_rates(phi)
    if predicted <= 0:
        raise AssumptionError("Phi_D has no decaying mode")
    grid = np.linspace(2.0, 8.0, n_times) / (g**2 * predicted)
    exact = propagate_exact(model, rho0, grid, g)
    steady = exact_steady_state(model, g)
    distances = np.array([operator_norm(s - steady) for s in exact.states])
    usable = distances > 1e-13
    if usable.sum() < 2:
        return predicted
    result = linregress(g**2 * grid[usable], np.log(distances[usable]))
    return float(-result.slope)


def _eigenvalue_labels(model: QrmModel, phi: PhiMaps):
    corrections = second_order_eigenvalues(model)
    mu = scipy.linalg.eigvals(phi.phi_d)
    mu = mu[np.argsort(-mu.real)]
    labels = [(f"diag{m}", -1, -1, 0.0, complex(value)) for m, value in enumerate(mu)]
    labels += [(f"{c.j}{c.k}", c.j, c.k, c.bohr, c.value) for c in corrections]
    return labels, corrections


def _predicted(labels, g: float) -> np.ndarray:
    return np.array([-1j * g * bohr + g * g * second for _, _, _, bohr, second in labels])


def spectral_gap_diagnostics(model: QrmModel, g: float | None = None, steps: int = 8) -> SpectralGapReport:
    """Gap Gamma of L_g outside the group born at 0, eta, delta, F and tracked eigenvalues.

    Tracking continues each predicted eigenvalue -i g (e_j - e_k) + g^2 lambda_jk from
    small g in steps, matching by linear assignment; close second candidates are flagged.
    """
    g = model.g if g is None else g
    values = scipy.linalg.eigvals(build_lindbladian(model, g).matrix)
    n0 = kernel_dimension(model)
    order = np.argsort(np.abs(values.real))
    rest = values[order[n0:]]
    gamma = float(np.min(np.abs(rest.real))) if rest.size else 0.0
    max_real = float(np.max(values.real))

    tracked: list[TrackedEigenvalue] = []
    eta = delta = f = None
    ambiguous = False
    try:
        phi = build_phi(model)
    except AssumptionError as e:
        log.warning(f"no perturbative diagnostics: {e}")
        phi = None
    if phi is not None:
        delta, f = phi_d_rates(phi)
        if model.h_c_is_zero:
            labels, corrections = _eigenvalue_labels(model, phi)
            eta = float(min(abs(c.value.real) for c in corrections)) if corrections else None
            if g > 0:
                tracked, ambiguous = _track(model, labels, g, steps)

    return SpectralGapReport(
        g=g,
        gamma=gamma,
        eta=eta,
        delta=delta,
        f=f,
        tracked=tracked,
        ambiguous=ambiguous,
        max_real_part=max_real,
    )


def _track(model: QrmModel, labels, g: float, steps: int) -> tuple[list[TrackedEigenvalue], bool]:
    previous_g = None
    current = None
    flags = np.zeros(len(labels), dtype=bool)
    for s in range(1, steps + 1):
        gs = g * s / steps
        values = scipy.linalg.eigvals(build_lindbladian(model, gs).matrix)
        if current is None:
            guess = _predicted(labels, gs)
        else:
            guess = current + _predicted(labels, gs) - _predicted(labels, previous_g)
        cost = np.abs(guess[:, None] - values[None, :])
        rows, cols = linear_sum_assignment(cost)
        current = np.empty(len(labels), dtype=complex)
        current[rows] = values[cols]
        noise = ENV_SETTINGS.spectral_tol * max(1.0, float(np.max(np.abs(values))))
        for row, col in zip(rows, cols):
            best = cost[row, col]
            second = np.partition(cost[row], 1)[1] if cost.shape[1] > 1 else np.inf
            if best > noise and second <= 2.0 * best:
                flags[row] = True
        previous_g = gs

    if flags.any():
        log.warning(f"eigenvalue tracking is ambiguous for {int(flags.sum())} branches")
    predicted = _predicted(labels, g)
    tracked = [
        TrackedEigenvalue(
            label=label,
            j=j,
            k=k,
            predicted=complex(predicted[i]),
            numeric=complex(current[i]),
            ambiguous=bool(flags[i]),
        )
        for i, (label, j, k, _, _) in enumerate(labels)
    ]
    return tracked, bool(flags.any())


def fit_second_order_coefficients(model: QrmModel, g_values) -> list[SecondOrderFit]:
    """Fit lambda_jk(g) + i g (e_j - e_k) = c2 g^2 + c3 g^3 over the tracked branches."""
    g_values = np.asarray(g_values, dtype=float)
    if g_values.size < 2:
        raise ConfigError("need at least two g values to fit")
    reports = [spectral_gap_diagnostics(model, g) for g in g_values]
    if not reports[0].tracked:
        raise AssumptionError("no tracked eigenvalues (needs H_C = 0 and Spec(H_bar_tau))")

    corrections = {(c.j, c.k): c for c in second_order_eigenvalues(model)}
    design = np.column_stack([g_values**2, g_values**3]).astype(complex)
    fits = []
    for index, branch in enumerate(reports[0].tracked):
        if branch.j < 0:
            continue
        correction = corrections[(branch.j, branch.k)]
        shifted = np.array([
            r.tracked[index].numeric + 1j * g * correction.bohr for r, g in zip(reports, g_values)
        ])
        (c2, c3), *_ = np.linalg.lstsq(design, shifted, rcond=None)
        scale = max(abs(correction.value), ENV_SETTINGS.herm_tol)
        fits.append(
            SecondOrderFit(
                j=branch.j,
                k=branch.k,
                c2=complex(c2),
                c3=complex(c3),
                predicted=correction.value,
                relative_error=float(abs(c2 - correction.value) / scale),
            )
        )
    return fits
