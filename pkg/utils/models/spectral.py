from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

from utils.models.matrix import CMatrix, Complex, CVector
from utils.models.qrm import SuperOp

Family = Literal["Q0", "A", "B", "AB"]
FactorKind = Literal["tau", "diag", "offdiag"]


class EigResult(BaseModel):
    """Raw eigendecomposition with per-pair diagnostics."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: CVector
    vectors: CMatrix
    residuals: np.ndarray
    defective: np.ndarray
    condition: float

    @property
    def semisimple(self) -> bool:
        return not bool(np.any(self.defective))


class SpectralDecomp(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: list[Complex]
    projectors: list[SuperOp]
    semisimple: list[bool]
    labels: list[str] = []

    def reconstruct(self) -> np.ndarray:
        return sum(lam * p.matrix for lam, p in zip(self.eigenvalues, self.projectors))

    def ranks(self) -> list[int]:
        return [int(round(np.trace(p.matrix).real)) for p in self.projectors]


class DissipatorProjectors(BaseModel):
    """Spectral projectors of the reset dissipator.

    D = -gamma_a Q_A - gamma_b Q_B - (gamma_a + gamma_b) Q_AB
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    q0: SuperOp
    qa: SuperOp
    qb: SuperOp
    qab: SuperOp

    def as_list(self) -> list[SuperOp]:
        return [self.q0, self.qa, self.qb, self.qab]

    def ranks(self) -> dict[str, int]:
        return {
            name: int(round(np.trace(q.matrix).real))
            for name, q in zip(("Q0", "A", "B", "AB"), self.as_list())
        }


class EigenTableEntry(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalue: Complex
    eigenvector: CMatrix
    family: Family
    a_kind: FactorKind
    c_pair: tuple[int, int]
    b_kind: FactorKind
    a_index: tuple[int, int]
    b_index: tuple[int, int]
    residual: float = 0.0

    @property
    def tag(self) -> str:
        return f"{self.family}:{self.a_kind}/{self.b_kind}"
