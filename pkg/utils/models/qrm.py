import hashlib
import json
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from env_settings import ENV_SETTINGS
from utils.models.matrix import CMatrix

# Factor order of the tri-partite Hilbert space
FACTOR_ORDER = ("A", "C", "B")


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m), initial=0.0))


def check_density(tau: np.ndarray, name: str) -> None:
    tol = ENV_SETTINGS.herm_tol
    if tau.shape[0] != tau.shape[1]:
        raise ValueError(f"{name} must be square, got shape {tau.shape}")
    if _max_abs(tau - tau.conj().T) > tol:
        raise ValueError(f"{name} is not Hermitian")
    if abs(np.trace(tau) - 1.0) > tol * max(1, tau.shape[0]):
        raise ValueError(f"{name} must have unit trace, got {np.trace(tau).real:.3e}")
    lowest = float(np.linalg.eigvalsh((tau + tau.conj().T) / 2)[0])
    if lowest < -tol:
        raise ValueError(f"{name} is not positive semidefinite (lowest eigenvalue {lowest:.3e})")


class HilbertDims(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_a: int = Field(ge=1)
    n_c: int = Field(ge=1)
    n_b: int = Field(ge=1)

    @model_validator(mode="after")
    def _within_cap(self) -> "HilbertDims":
        if self.n > ENV_SETTINGS.dim_cap:
            raise ValueError(
                f"n_a*n_c*n_b = {self.n} exceeds the dimension cap {ENV_SETTINGS.dim_cap}"
            )
        return self

    @property
    def n(self) -> int:
        return self.n_a * self.n_c * self.n_b

    @property
    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_a, self.n_c, self.n_b)


class ResetSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tau: CMatrix
    gamma: float = Field(gt=0)

    @field_validator("tau")
    @classmethod
    def _tau_is_density(cls, tau: np.ndarray) -> np.ndarray:
        check_density(tau, "tau")
        return tau


class SuperOp(BaseModel):
    """Linear map on B(C^dim) acting on column-stacked operators."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(ge=1)
    matrix: CMatrix
    label: str = ""

    @model_validator(mode="after")
    def _square_on_operators(self) -> "SuperOp":
        size = self.dim * self.dim
        if self.matrix.shape != (size, size):
            raise ValueError(
                f"superoperator on dimension {self.dim} needs a {size}x{size} matrix, "
                f"got {self.matrix.shape}"
            )
        return self

    @classmethod
    def from_map(cls, fn: Callable[[np.ndarray], np.ndarray], dim: int, label: str = "") -> "SuperOp":
        size = dim * dim
        matrix = np.zeros((size, size), dtype=complex)
        for index in range(size):
            e = np.zeros((dim, dim), dtype=complex)
            e[index % dim, index // dim] = 1.0
            matrix[:, index] = fn(e).reshape(-1, order="F")
        return cls(dim=dim, matrix=matrix, label=label)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = self.matrix @ np.asarray(rho, dtype=complex).reshape(-1, order="F")
        return out.reshape(self.dim, self.dim, order="F")

    def compose(self, other: "SuperOp") -> "SuperOp":
        """self after other"""
        return SuperOp(dim=self.dim, matrix=self.matrix @ other.matrix)

    def __add__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(dim=self.dim, matrix=self.matrix + other.matrix)

    def __sub__(self, other: "SuperOp") -> "SuperOp":
        return SuperOp(dim=self.dim, matrix=self.matrix - other.matrix)

    def scaled(self, factor: complex) -> "SuperOp":
        return SuperOp(dim=self.dim, matrix=factor * self.matrix, label=self.label)

    @classmethod
    def identity(cls, dim: int) -> "SuperOp":
        return cls(dim=dim, matrix=np.eye(dim * dim, dtype=complex), label="I")


class QrmModel(BaseModel):
    """Tri-partite quantum reset model on H_A (x) H_C (x) H_B.

    L_g(rho) = -i[H_A + H_C + H_B + g H, rho]
               + gamma_a (tau_a (x) tr_A rho - rho) + gamma_b (tr_B rho (x) tau_b - rho)
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dims: HilbertDims
    tau_a: CMatrix
    tau_b: CMatrix
    gamma_a: float = Field(gt=0)
    gamma_b: float = Field(gt=0)
    h_a: CMatrix
    h_b: CMatrix
    h_c: CMatrix
    h_coupling: CMatrix
    g: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _default_hamiltonians(cls, data: Any) -> Any:
        if not isinstance(data, dict) or "dims" not in data:
            return data
        dims = data["dims"]
        if isinstance(dims, dict):
            dims = HilbertDims(**dims)
        data = dict(data)
        for key, size in (("h_a", dims.n_a), ("h_b", dims.n_b), ("h_c", dims.n_c), ("h_coupling", dims.n)):
            if data.get(key) is None:
                data[key] = np.zeros((size, size), dtype=complex)
        return data

    @model_validator(mode="after")
    def _check_invariants(self) -> "QrmModel":
        d = self.dims
        expected = {
            "tau_a": d.n_a,
            "tau_b": d.n_b,
            "h_a": d.n_a,
            "h_b": d.n_b,
            "h_c": d.n_c,
            "h_coupling": d.n,
        }
        for name, size in expected.items():
            m = getattr(self, name)
            if m.shape != (size, size):
                raise ValueError(f"{name} has shape {m.shape}, expected ({size}, {size})")

        check_density(self.tau_a, "tau_a")
        check_density(self.tau_b, "tau_b")

        tol = ENV_SETTINGS.herm_tol
        for name in ("h_a", "h_b", "h_c", "h_coupling"):
            m = getattr(self, name)
            if _max_abs(m - m.conj().T) > tol:
                raise ValueError(f"{name} is not Hermitian")

        if _max_abs(self.h_a @ self.tau_a - self.tau_a @ self.h_a) > tol:
            raise ValueError("[h_a, tau_a] != 0")
        if _max_abs(self.h_b @ self.tau_b - self.tau_b @ self.h_b) > tol:
            raise ValueError("[h_b, tau_b] != 0")

        if not np.isfinite(self.g):
            raise ValueError("g must be finite")
        return self

    @property
    def reset_a(self) -> ResetSpec:
        return ResetSpec(tau=self.tau_a, gamma=self.gamma_a)

    @property
    def reset_b(self) -> ResetSpec:
        return ResetSpec(tau=self.tau_b, gamma=self.gamma_b)

    @property
    def n(self) -> int:
        return self.dims.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.dims.as_tuple

    @property
    def h_c_is_zero(self) -> bool:
        return _max_abs(self.h_c) <= ENV_SETTINGS.herm_tol

    @property
    def is_undriven(self) -> bool:
        """True when H_A = H_B = H_C = 0, i.e. L_0 = D."""
        tol = ENV_SETTINGS.herm_tol
        return all(_max_abs(m) <= tol for m in (self.h_a, self.h_b, self.h_c))

    def with_g(self, g: float) -> "QrmModel":
        return self.model_copy(update={"g": float(g)})

    def with_coupling(self, h_coupling: np.ndarray) -> "QrmModel":
        return QrmModel.from_dict({**self.to_dict(), "h_coupling": h_coupling})

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: dict) -> "QrmModel":
        return cls.model_validate(data)

    def model_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


class SimpleQrm(BaseModel):
    """Single system reset by M baths: L(rho) = -i[H, rho] + sum_l gamma_l (tau_l tr rho - rho)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(ge=1)
    hamiltonian: CMatrix
    resets: list[ResetSpec] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_shapes(self) -> "SimpleQrm":
        if self.hamiltonian.shape != (self.dim, self.dim):
            raise ValueError(f"hamiltonian has shape {self.hamiltonian.shape}, expected dim {self.dim}")
        if _max_abs(self.hamiltonian - self.hamiltonian.conj().T) > ENV_SETTINGS.herm_tol:
            raise ValueError("hamiltonian is not Hermitian")
        for reset in self.resets:
            if reset.tau.shape != (self.dim, self.dim):
                raise ValueError(f"reset state has shape {reset.tau.shape}, expected dim {self.dim}")
        return self

    @property
    def gamma_total(self) -> float:
        return float(sum(r.gamma for r in self.resets))

    @property
    def t_matrix(self) -> np.ndarray:
        """T = (1/Gamma) sum_l gamma_l tau_l"""
        return sum(r.gamma * r.tau for r in self.resets) / self.gamma_total
