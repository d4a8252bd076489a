"""Classical Markov chain carried by Phi_D when L_0 = D.

On the time scale s = g^2 t the populations of C in the eigenbasis of H_bar_tau
follow the chain with rate matrix Q = Phi_D^T.
"""

import logging

import numpy as np

from env_settings import ENV_SETTINGS
from utils.errors import AssumptionError, ConfigError, ResidualError
from utils.linalg import expm, null_space
from utils.models.perturbative import PhiMaps
from utils.models.stochastic import RateMatrix, TransitionKernel
from utils.perturbation import check_coup

log = logging.getLogger(__name__)


def rate_matrix_from_phi(phi: PhiMaps) -> RateMatrix:
    if not phi.l0_is_dissipator:
        raise AssumptionError("the Markov chain interpretation needs L_0 = D (no drive, H_C = 0)")
    q = phi.phi_d.T.copy()
    n = q.shape[0]
    scale = max(1.0, float(np.max(np.abs(q), initial=0.0)))
    off_diagonal = ~np.eye(n, dtype=bool)
    lowest = float(q[off_diagonal].min(initial=0.0))
    if lowest < -ENV_SETTINGS.residual_tol * scale:
        raise ResidualError(f"Phi_D has a negative rate {lowest:.3e}")
    # rounding noise only, after the check above
    q[off_diagonal] = np.clip(q[off_diagonal], 0.0, None)
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))

    coup = check_coup(phi)
    if coup.criteria_agree is False:
        log.warning("rank and closed-class criteria for Coup disagree on this rate matrix")

    return RateMatrix(
        q=q,
        labels=[f"phi_{j}" for j in range(n)],
        basis=phi.basis,
        coup_holds=coup.holds,
    )


def transition_probabilities(rates: RateMatrix, s: float) -> TransitionKernel:
    """P(s) = expm(s Q), negative round-off clamped and rows renormalized."""
    if s < 0:
        raise ConfigError(f"time must be non-negative, got {s}")
    p = np.real(expm(s * rates.q))
    lowest = float(p.min(initial=0.0))
    clamped = 0.0
    if lowest < 0.0:
        if lowest < -ENV_SETTINGS.clamp_tol * max(1.0, s * float(np.max(np.abs(rates.q), initial=0.0))):
            raise ResidualError(f"transition kernel has a negative entry {lowest:.3e} at s = {s}")
        clamped = -lowest
        p = np.clip(p, 0.0, None)
    p = p / p.sum(axis=1, keepdims=True)
    return TransitionKernel(s=s, p=p, clamped=clamped)


def stationary_distribution(rates: RateMatrix) -> np.ndarray:
    """Unique pi with pi Q = 0, sum(pi) = 1."""
    kernel = null_space(rates.q.T)
    if kernel.shape[1] != 1:
        raise AssumptionError(f"the chain has {kernel.shape[1]} stationary distributions")
    pi = np.real(kernel[:, 0])
    pi = pi / pi.sum()
    if pi.min() < -ENV_SETTINGS.clamp_tol:
        raise ResidualError(f"stationary distribution has a negative entry {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def chapman_kolmogorov_deviation(rates: RateMatrix, s: float, u: float) -> float:
    """max |P(s + u) - P(s) P(u)|"""
    joint = transition_probabilities(rates, s + u).p
    product = transition_probabilities(rates, s).p @ transition_probabilities(rates, u).p
    return float(np.max(np.abs(joint - product)))
