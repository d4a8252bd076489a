"""Named models with closed-form answers.

qubit-n-qubit: a qubit A, an N-level C and a qubit B, C coupled to A through alpha and
to B through beta. three-qubit: a chain of qubits with nearest neighbour density and
flip-flop interactions; it is the N = 2 case of the former after relabelling C and B.
"""

import logging

import numpy as np

from utils.errors import AssumptionError, ConfigError, ModelInvariantError
from utils.linalg import identity, kron
from utils.models.perturbative import PhiMaps
from utils.models.presets import KernelClosedForm, QubitNQubitParams, ThreeQubitClosedForms, ThreeQubitParams
from utils.models.qrm import HilbertDims, QrmModel

log = logging.getLogger(__name__)

NUMBER = np.diag([0.0, 1.0]).astype(complex)
FLIP = np.array([[0, 1], [1, 0]], dtype=complex)


def _ket_bra(i: int, j: int, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


def _hermitian(m: np.ndarray) -> np.ndarray:
    return m + m.conj().T


def _qubit_state(t: float) -> np.ndarray:
    return np.diag([t, 1.0 - t]).astype(complex)


def qubit_n_qubit_hamiltonians(p: QubitNQubitParams) -> tuple[np.ndarray, np.ndarray]:
    """(H_alpha on A (x) C, H_beta on C (x) B)"""
    n = p.n
    g_, e_ = _ket_bra(0, 0, 2), _ket_bra(1, 1, 2)
    to_first = np.zeros((n, n), dtype=complex)
    to_first[0, :] = p.alpha
    h_alpha = kron(g_, np.diag(p.a_g)) + kron(e_, np.diag(p.a_e)) + _hermitian(kron(_ket_bra(0, 1, 2), to_first))

    down, up = _ket_bra(0, 0, 2), _ket_bra(1, 1, 2)
    to_last = np.zeros((n, n), dtype=complex)
    to_last[n - 1, :] = p.beta
    h_beta = kron(np.diag(p.b_down), down) + kron(np.diag(p.b_up), up) + _hermitian(kron(to_last, _ket_bra(0, 1, 2)))
    return h_alpha, h_beta


def build_qubit_n_qubit(p: QubitNQubitParams) -> QrmModel:
    """H = H_alpha (x) I_B + I_A (x) H_beta with H_A = H_B = H_C = 0."""
    h_alpha, h_beta = qubit_n_qubit_hamiltonians(p)
    h = kron(h_alpha, identity(2)) + kron(identity(2), h_beta)
    if not p.coup_hypothesis:
        log.warning("coupling amplitudes do not meet the hypothesis that guarantees Coup")
    return QrmModel(
        dims=HilbertDims(n_a=2, n_c=p.n, n_b=2),
        tau_a=_qubit_state(p.t_a),
        tau_b=_qubit_state(p.t_b),
        gamma_a=p.gamma_a,
        gamma_b=p.gamma_b,
        h_coupling=h,
        g=p.g,
    )


def qubit_n_qubit_phi_d(p: QubitNQubitParams) -> np.ndarray:
    """Phi_D in the level basis of C, from the rates S, U, T, V."""
    s, u, t, v = p.rates()
    n = p.n
    m = np.zeros((n, n))
    for j in range(1, n - 1):
        m[0, j] = s[j]
        m[n - 1, j] = t[j]
        m[j, 0] = u[j]
        m[j, n - 1] = v[j]
    m[0, n - 1] = s[n - 1] + v[0]
    m[n - 1, 0] = u[n - 1] + t[0]
    np.fill_diagonal(m, -m.sum(axis=0))
    return 2.0 / (p.gamma_a * p.gamma_b) * m


def closed_form_kernel_xj(p: QubitNQubitParams) -> KernelClosedForm:
    """Populations x_j spanning ker Phi_D, by recursion and by the explicit y(N) form.

    x_1 = S_N + sum_j V_j S_j/(S_j + T_j) + V_1
    x_N = U_N + sum_j U_j T_j/(S_j + T_j) + T_1
    x_j = (U_j x_1 + V_j x_N)/(S_j + T_j),  1 < j < N
    """
    if not p.coup_hypothesis:
        raise AssumptionError("the coupling amplitudes violate the Coup hypothesis")
    s, u, t, v = p.rates()
    n = p.n
    interior = np.arange(1, n - 1)
    denominators = s + t
    if np.any(denominators[interior] == 0):
        bad = [int(j) for j in interior if denominators[j] == 0]
        raise ModelInvariantError(f"S_j + T_j = 0 for interior levels {bad}")

    ratio = lambda a, b: float(np.sum(a[interior] * b[interior] / denominators[interior]))  # noqa: E731
    x = np.zeros(n)
    x[0] = s[-1] + ratio(v, s) + v[0]
    x[-1] = u[-1] + ratio(u, t) + t[0]
    x[interior] = (u[interior] * x[0] + v[interior] * x[-1]) / denominators[interior]

    g_a, g_b, t_a, t_b = p.gamma_a, p.gamma_b, p.t_a, p.t_b
    a2, b2 = np.abs(p.alpha) ** 2, np.abs(p.beta) ** 2
    y = g_a * g_b * float(np.sum(a2[interior] * b2[interior] / denominators[interior]))
    explicit = np.zeros(n)
    explicit[0] = (1 - t_a) * a2[-1] * g_b + y * t_b * (1 - t_a) + t_b * b2[0] * g_a
    explicit[-1] = t_a * a2[-1] * g_b + y * t_a * (1 - t_b) + (1 - t_b) * b2[0] * g_a
    explicit[interior] = (
        t_a * a2[-1] * g_b
        + t_b * b2[0] * g_a
        + y * t_a * t_b
        + g_a * g_b
        * (a2[-1] * t_a * (2 * t_b - 1) * b2[interior] + b2[0] * t_b * (2 * t_a - 1) * a2[interior])
        / denominators[interior]
    )

    z = float(x.sum())
    rho0 = kron(kron(_qubit_state(t_a), np.diag(x / z).astype(complex)), _qubit_state(t_b))
    return KernelClosedForm(x_recursive=x, x_explicit=explicit, z=z, rho0=rho0, y=y)


def interior_balance(p: QubitNQubitParams) -> bool:
    """(2t_A - 1) t_B ga |b_1|^2/(1 - t_A) = (2t_B - 1) t_A gb |a_N|^2/(1 - t_B): interior x_j all equal."""
    left = (2 * p.t_a - 1) * p.t_b * p.gamma_a * abs(p.beta[0]) ** 2 / (1 - p.t_a)
    right = (2 * p.t_b - 1) * p.t_a * p.gamma_b * abs(p.alpha[-1]) ** 2 / (1 - p.t_b)
    return bool(np.isclose(left, right, rtol=1e-12, atol=1e-15))


def phi_d_in_level_order(phi: PhiMaps) -> np.ndarray:
    """Phi_D re-indexed by the computational basis vector each eigenvector of H_bar_tau sits on."""
    index = np.argmax(np.abs(phi.basis), axis=0)
    if len(set(index.tolist())) != len(index):
        raise ModelInvariantError("diagonal basis is not a permutation of the level basis")
    out = np.zeros_like(phi.phi_d)
    out[np.ix_(index, index)] = phi.phi_d
    return out


def three_qubit_operators(p: ThreeQubitParams) -> tuple[np.ndarray, np.ndarray]:
    """(H_0, H) on |a c b>, index 4a + 2c + b."""
    eye = identity(2)
    flip_flop = _ket_bra(1, 2, 4) + _ket_bra(2, 1, 4)
    h0 = (
        p.e_a * kron(kron(NUMBER, eye), eye)
        + p.e_c * kron(kron(eye, NUMBER), eye)
        + p.e_b * kron(kron(eye, eye), NUMBER)
    )
    h = (
        p.u * (kron(kron(NUMBER, NUMBER), eye) + kron(eye, kron(NUMBER, NUMBER)))
        + p.j_alpha * kron(flip_flop, eye)
        + p.j_beta * kron(eye, flip_flop)
    )
    return h0, h


def three_qubit_hamiltonian_matrix(p: ThreeQubitParams, g: float | None = None) -> np.ndarray:
    """H_tot = H_0 + g H"""
    g = p.g if g is None else g
    h0, h = three_qubit_operators(p)
    return h0 + g * h


def build_three_qubit(p: ThreeQubitParams, drive: bool = False) -> QrmModel:
    """Three-qubit chain; the bare energies enter H_A, H_C, H_B only with drive."""
    _, h = three_qubit_operators(p)
    if not p.spec_holds:
        log.warning("U = 0 or t_A + t_B = 2: H_bar_tau is degenerate")
    data = dict(
        dims=HilbertDims(n_a=2, n_c=2, n_b=2),
        tau_a=_qubit_state(p.ground_a),
        tau_b=_qubit_state(p.ground_b),
        gamma_a=p.gamma_a,
        gamma_b=p.gamma_b,
        h_coupling=h,
        g=p.g,
    )
    if drive:
        data.update(h_a=p.e_a * NUMBER, h_b=p.e_b * NUMBER, h_c=p.e_c * NUMBER)
    return QrmModel(**data)


def three_qubit_as_qubit_n_qubit(p: ThreeQubitParams) -> tuple[QubitNQubitParams, np.ndarray]:
    """N = 2 parameters reproducing the chain, and the relabelling I (x) X (x) X between them.

    The level phi_1 of C is the excited qubit and dn on B is the excited qubit, so t_B -> 1 - t_B.
    """
    params = QubitNQubitParams(
        n=2,
        a_g=[0.0, 0.0],
        a_e=[p.u, 0.0],
        b_down=[p.u, 0.0],
        b_up=[0.0, 0.0],
        alpha=[0.0, p.j_alpha],
        beta=[p.j_beta, 0.0],
        t_a=p.ground_a,
        t_b=1.0 - p.ground_b,
        gamma_a=p.gamma_a,
        gamma_b=p.gamma_b,
        g=p.g,
    )
    relabel = kron(identity(2), kron(FLIP, FLIP))
    return params, relabel


def _r2_diagonal(p: ThreeQubitParams, kappa0: float) -> np.ndarray:
    g_a, g_b = p.gamma_a, p.gamma_b
    tau_a = (p.ground_a, 1 - p.ground_a)
    tau_b = (p.ground_b, 1 - p.ground_b)
    out = np.zeros(8)
    for a in (0, 1):
        for c in (0, 1):
            for b in (0, 1):
                ta, tb = tau_a[a], tau_b[b]
                e = (
                    (a - c) * tb
                    + ta * (c - b)
                    + (g_a / g_b) * ta * ((1 - 2 * c) * tb + c - b)
                    + (g_b / g_a) * tb * (a - c + 2 * ta * c - ta)
                )
                out[4 * a + 2 * c + b] = e
    return 2 * kappa0 * p.j_alpha * p.j_beta / (g_a + g_b) * out


def three_qubit_closed_forms(p: ThreeQubitParams) -> ThreeQubitClosedForms:
    """Leading populations, Phi_D, R_1, R_2 and the second-order population shift for L_0 = D.

    All operators in the computational basis |a c b>. With kappa_0 = (t_A - t_B) Ja Jb / Sigma,
    Sigma = ga Jb^2 + gb Ja^2, the corrections vanish at t_A = t_B.
    """
    t_a, t_b = p.ground_a, p.ground_b
    s_a, s_b = 1 - t_a, 1 - t_b
    g_a, g_b = p.gamma_a, p.gamma_b
    j_a, j_b, u = p.j_alpha, p.j_beta, p.u

    sigma = g_a * j_b**2 + g_b * j_a**2
    phi_plus = g_a * j_b**2 * t_b + g_b * j_a**2 * t_a
    phi_minus = g_a * j_b**2 * s_b + g_b * j_a**2 * s_a
    if sigma == 0:
        raise AssumptionError("J_alpha = J_beta = 0: Phi_D vanishes and Coup fails")
    rho_c0 = np.diag([phi_plus, phi_minus]).astype(complex) / sigma
    phi_d = 2.0 / (g_a * g_b) * np.array([[-phi_minus, phi_plus], [phi_minus, -phi_plus]])
    kappa0 = (t_a - t_b) * j_a * j_b / sigma

    tau_a, tau_b = _qubit_state(t_a), _qubit_state(t_b)
    exchange = 1j * (_ket_bra(1, 2, 4) - _ket_bra(2, 1, 4))
    r1 = kappa0 * (j_b * kron(exchange, tau_b) + j_a * kron(tau_a, exchange))

    flip_flop = _ket_bra(1, 2, 4) + _ket_bra(2, 1, 4)
    weighted_b = np.diag([g_b * t_b, g_a + g_b * s_b]).astype(complex)
    weighted_a = np.diag([g_a * t_a, g_b + g_a * s_a]).astype(complex)
    o1 = _hermitian(_ket_bra(4, 1, 8))
    o2 = _hermitian(_ket_bra(6, 3, 8))
    r2_diagonal = _r2_diagonal(p, kappa0)
    r2 = (
        np.diag(r2_diagonal).astype(complex)
        + kappa0 * u / (g_a + g_b) * (
            (j_b * s_b / g_a) * kron(flip_flop, weighted_b) - (j_a * s_a / g_b) * kron(weighted_a, flip_flop)
        )
        + kappa0 / (g_a + g_b) * ((j_b**2 * t_b - j_a**2 * t_a) * o1 + (j_a**2 * s_a - j_b**2 * s_b) * o2)
    )

    d0 = (
        2 * (t_a - t_b) * j_a**2 * j_b**2 / (g_a**2 * g_b**2 * (g_a + g_b) * sigma)
        * (
            (g_a + g_b) * (j_b**2 * g_a * (2 * g_a - g_b) - j_a**2 * g_b * (2 * g_b - g_a))
            + u**2 * (s_a * g_a**2 * (g_b + s_a * g_a) - s_b * g_b**2 * (g_a + s_b * g_b))
        )
    )
    x2 = g_a * g_b * d0 / (2 * sigma)

    return ThreeQubitClosedForms(
        phi_plus=phi_plus,
        phi_minus=phi_minus,
        rho_c0=rho_c0,
        phi_d=phi_d,
        phi_d_spectrum=[0.0, -2.0 * sigma / (g_a * g_b)],
        kappa0=kappa0,
        r1=r1,
        r2=r2,
        r2_diagonal=r2_diagonal,
        d0=d0,
        x2=x2,
        x2_displayed=1j * d0,
    )


def three_qubit_transition_probabilities(p: ThreeQubitParams, s: float) -> np.ndarray:
    """P[i, j] = P(X_s = j | X_0 = i) on the populations of C, s = g^2 t."""
    t_a, t_b = p.ground_a, p.ground_b
    g_a, g_b = p.gamma_a, p.gamma_b
    sigma = g_a * p.j_beta**2 + g_b * p.j_alpha**2
    phi_plus = g_a * p.j_beta**2 * t_b + g_b * p.j_alpha**2 * t_a
    phi_minus = g_a * p.j_beta**2 * (1 - t_b) + g_b * p.j_alpha**2 * (1 - t_a)
    decay = np.exp(-2.0 * s * sigma / (g_a * g_b))
    return np.array([
        [(phi_plus + decay * phi_minus) / sigma, phi_minus * (1 - decay) / sigma],
        [phi_plus * (1 - decay) / sigma, (phi_minus + decay * phi_plus) / sigma],
    ])


PRESETS = ("three-qubit", "qubit-n-qubit")


def default_qubit_n_qubit(n: int = 3, **overrides) -> QubitNQubitParams:
    """Real amplitudes alpha rising and beta falling over the levels of C, t_A = 0.7, t_B = 0.6."""
    settings = {"t_a": 0.7, "t_b": 0.6, "gamma_a": 1.0, "gamma_b": 1.0, "g": 0.0, "spacing": 0.37, **overrides}
    return QubitNQubitParams.from_amplitudes(
        alpha=np.linspace(0.5, 1.0, n),
        beta=np.linspace(1.0, 0.5, n),
        **{k: float(v) for k, v in settings.items()},
    )


def load_preset(
    name: str,
    overrides: dict[str, str] | None = None,
    drive: bool = False,
) -> tuple[QrmModel, ThreeQubitParams | QubitNQubitParams]:
    """Named preset with key=value overrides; raises ConfigError for unknown names or keys."""
    overrides = dict(overrides or {})
    if name == "three-qubit":
        unknown = set(overrides) - set(ThreeQubitParams.model_fields)
        if unknown:
            raise ConfigError(f"unknown three-qubit parameters {sorted(unknown)}")
        params = ThreeQubitParams.model_validate(overrides)
        return build_three_qubit(params, drive=drive), params
    if name == "qubit-n-qubit":
        allowed = {"n", "t_a", "t_b", "gamma_a", "gamma_b", "g", "spacing"}
        unknown = set(overrides) - allowed
        if unknown:
            raise ConfigError(f"unknown qubit-n-qubit parameters {sorted(unknown)}, expected {sorted(allowed)}")
        n = int(overrides.pop("n", 3))
        params = default_qubit_n_qubit(n, **overrides)
        return build_qubit_n_qubit(params), params
    raise ConfigError(f"unknown preset {name!r}, expected one of {PRESETS}")
