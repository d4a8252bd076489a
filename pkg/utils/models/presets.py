from typing import Annotated

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.models.matrix import CMatrix, Complex, CVector, RMatrix, RVector

Probability = Annotated[float, Field(gt=0, lt=1)]


class QubitNQubitParams(BaseModel):
    """Qubit A, N-level C and qubit B.

    H_alpha = sum_j a_g[j] |g,j><g,j| + a_e[j] |e,j><e,j| + sum_k alpha[k] |g,1><e,k| + h.c.
    H_beta  = sum_j b_down[j] |j,dn><j,dn| + b_up[j] |j,up><j,up| + sum_k beta[k] |N,dn><k,up| + h.c.
    tau_a = diag(t_a, 1 - t_a) on (g, e), tau_b = diag(t_b, 1 - t_b) on (dn, up).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(ge=2)
    a_g: RVector
    a_e: RVector
    b_down: RVector
    b_up: RVector
    alpha: CVector
    beta: CVector
    t_a: Probability
    t_b: Probability
    gamma_a: float = Field(gt=0)
    gamma_b: float = Field(gt=0)
    g: float = 0.0

    @model_validator(mode="after")
    def _lengths(self) -> "QubitNQubitParams":
        for name in ("a_g", "a_e", "b_down", "b_up", "alpha", "beta"):
            if len(getattr(self, name)) != self.n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected {self.n}")
        return self

    @classmethod
    def from_amplitudes(
        cls,
        alpha,
        beta,
        t_a: float,
        t_b: float,
        gamma_a: float = 1.0,
        gamma_b: float = 1.0,
        g: float = 0.0,
        spacing: float = 0.37,
    ) -> "QubitNQubitParams":
        """Zero energies except a quadratic ladder a_g[j] = spacing (j + 1)^2, which keeps H_bar_tau simple."""
        n = len(alpha)
        zeros = np.zeros(n)
        return cls(
            n=n,
            a_g=spacing * (np.arange(n) + 1.0) ** 2,
            a_e=zeros,
            b_down=zeros,
            b_up=zeros,
            alpha=np.asarray(alpha, dtype=complex),
            beta=np.asarray(beta, dtype=complex),
            t_a=t_a,
            t_b=t_b,
            gamma_a=gamma_a,
            gamma_b=gamma_b,
            g=g,
        )

    @property
    def coup_hypothesis(self) -> bool:
        """Interior alpha (or interior beta) all nonzero, and |beta_1|^2 + |alpha_N|^2 != 0."""
        ends = abs(self.beta[0]) ** 2 + abs(self.alpha[-1]) ** 2 > 0
        interior_alpha = bool(np.all(np.abs(self.alpha[1:-1]) > 0))
        interior_beta = bool(np.all(np.abs(self.beta[1:-1]) > 0))
        return ends and (interior_alpha or interior_beta)

    def rates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(S, U, T, V) per level of C."""
        a2 = np.abs(self.alpha) ** 2
        b2 = np.abs(self.beta) ** 2
        s = self.gamma_b * (1 - self.t_a) * a2
        u = self.gamma_b * self.t_a * a2
        t = self.gamma_a * (1 - self.t_b) * b2
        v = self.gamma_a * self.t_b * b2
        return s, u, t, v


class ThreeQubitParams(BaseModel):
    """Chain A - C - B of qubits.

    H = U (n_A n_C + n_C n_B) + J_alpha (|01><10| + h.c.)_AC + J_beta (|01><10| + h.c.)_CB,
    tau_# = diag(t_#, 1 - t_#) with t_# = 1/(1 + e^{-beta_# e_#}) unless given directly.
    """

    model_config = ConfigDict(frozen=True)

    e_a: float = 1.0
    e_b: float = 1.0
    e_c: float = 1.0
    u: float = 1.0
    j_alpha: float = 1.0
    j_beta: float = 0.5
    beta_a: float | None = 1.0
    beta_b: float | None = 0.25
    t_a: Probability | None = None
    t_b: Probability | None = None
    gamma_a: float = Field(default=1.0, gt=0)
    gamma_b: float = Field(default=0.5, gt=0)
    g: float = 0.0

    @model_validator(mode="after")
    def _temperatures(self) -> "ThreeQubitParams":
        for side in ("a", "b"):
            if getattr(self, f"t_{side}") is None and getattr(self, f"beta_{side}") is None:
                raise ValueError(f"give either t_{side} or beta_{side}")
        return self

    @staticmethod
    def thermal_weight(beta: float, energy: float) -> float:
        return float(1.0 / (1.0 + np.exp(-beta * energy)))

    @property
    def ground_a(self) -> float:
        return self.t_a if self.t_a is not None else self.thermal_weight(self.beta_a, self.e_a)

    @property
    def ground_b(self) -> float:
        return self.t_b if self.t_b is not None else self.thermal_weight(self.beta_b, self.e_b)

    @property
    def spec_holds(self) -> bool:
        """H_bar_tau = U (2 - t_A - t_B) |1><1| has a simple spectrum."""
        return self.u != 0 and self.ground_a + self.ground_b != 2

    @property
    def is_equilibrium(self) -> bool:
        return self.ground_a == self.ground_b


class ThreeQubitClosedForms(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phi_plus: float
    phi_minus: float
    rho_c0: CMatrix
    phi_d: RMatrix
    phi_d_spectrum: list[float]
    kappa0: float
    r1: CMatrix
    r2: CMatrix
    r2_diagonal: RVector
    d0: float
    x2: float
    x2_displayed: Complex


class KernelClosedForm(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x_recursive: RVector
    x_explicit: RVector
    z: float
    rho0: CMatrix
    y: float
