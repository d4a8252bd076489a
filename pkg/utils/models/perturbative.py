from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from utils.models.matrix import CMatrix, Complex, RMatrix, RVector

DiagBasis = Literal["h_bar_tau", "h_c"]


class EffectiveHamiltonian(BaseModel):
    """Reset-averaged couplings seen by C.

    h_bar_tau   = tr_AB(H tau_a (x) I (x) tau_b)   on C
    h_bar_tau_a = tr_A(H tau_a (x) I (x) I)        on C (x) B
    h_bar_tau_b = tr_B(H I (x) I (x) tau_b)        on A (x) C
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h_bar_tau: CMatrix
    h_bar_tau_a: CMatrix
    h_bar_tau_b: CMatrix
    energies: RVector
    vectors: CMatrix
    spec_simple: bool
    distinct_bohr: bool
    double_sum_deviation: float = 0.0


class PhiMaps(BaseModel):
    """Second-order effective generator on C and its diagonal restriction.

    phi acts on column-stacked operators of C; phi_d[j, k] = <phi_j| Phi(P_k) |phi_j>
    in the columns of basis.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    phi: CMatrix
    phi_d: RMatrix
    basis: CMatrix
    energies: RVector
    diag_basis: DiagBasis
    l0_is_dissipator: bool
    h_route_deviation: float | None = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "PhiMaps":
        n = self.phi_d.shape[0]
        if self.phi_d.shape != (n, n):
            raise ValueError(f"phi_d must be square, got {self.phi_d.shape}")
        if self.phi.shape != (n * n, n * n):
            raise ValueError(f"phi must be {n * n}x{n * n}, got {self.phi.shape}")
        if self.basis.shape != (n, n):
            raise ValueError(f"basis must be {n}x{n}, got {self.basis.shape}")
        return self

    @property
    def n(self) -> int:
        return self.phi_d.shape[0]

    def apply(self, rho_c: np.ndarray) -> np.ndarray:
        out = self.phi @ np.asarray(rho_c, dtype=complex).reshape(-1, order="F")
        return out.reshape(self.n, self.n, order="F")

    def diagonal_operator(self, weights: np.ndarray) -> np.ndarray:
        """sum_k weights[k] P_k in the computational basis of C."""
        return self.basis @ np.diag(weights) @ self.basis.conj().T

    def diagonal_of(self, rho_c: np.ndarray) -> np.ndarray:
        return np.diag(self.basis.conj().T @ rho_c @ self.basis).copy()


class CoupReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    holds: bool
    rank: int
    n: int
    kernel: RVector
    witness: int | None = None
    closed_classes: int | None = None
    combinatorial_holds: bool | None = None
    criteria_agree: bool | None = None
    zero_components: list[int] = []
    clamped: float = 0.0


class SteadySeries(BaseModel):
    """rho(g) = sum_j g^j rho_j with rho_j = R^j(rho_0)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    order: int
    branch: DiagBasis
    coefficients: list[CMatrix]
    r_c: list[CMatrix]
    pieces: list[CMatrix]
    hierarchy_residuals: list[float]
    g0: float | None = None
    r_map: CMatrix | None = None

    @model_validator(mode="after")
    def _consistent_lengths(self) -> "SteadySeries":
        if len(self.coefficients) != self.order + 1 or len(self.r_c) != self.order + 1:
            raise ValueError("series needs order + 1 coefficients")
        if len(self.pieces) != self.order or len(self.hierarchy_residuals) != self.order:
            raise ValueError("series needs one R_j and one residual per order above 0")
        return self

    def evaluate(self, g: float, order: int | None = None) -> np.ndarray:
        order = self.order if order is None else min(order, self.order)
        return sum(g**j * self.coefficients[j] for j in range(order + 1))


class SteadyState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g: float
    rho: CMatrix
    residual: float
    method: Literal["resolvent", "series", "null-space"]
    g0: float | None = None
    order: int | None = None


class EigenvalueCorrection(BaseModel):
    """lambda_jk(g) = -i g (e_j - e_k) + g^2 value + O(g^3)"""

    model_config = ConfigDict(frozen=True)

    j: int
    k: int
    value: Complex
    bohr: float
    bound: float
    satisfies_bound: bool
    bound_applies: bool
