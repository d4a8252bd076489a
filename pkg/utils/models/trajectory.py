from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from utils.models.matrix import CMatrix, Complex, RMatrix, RVector

PropagationMethod = Literal["exact", "ode", "reduced", "steady-projector"]
NormName = Literal["fro", "trace"]


class PropagationResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    method: PropagationMethod
    g: float
    times: RVector
    states: list[CMatrix]

    @model_validator(mode="after")
    def _one_state_per_time(self) -> "PropagationResult":
        if len(self.states) != len(self.times):
            raise ValueError(f"{len(self.states)} states for {len(self.times)} times")
        return self

    def trace_drift(self) -> float:
        return float(max(abs(np.trace(s) - 1.0) for s in self.states))

    def hermiticity_drift(self) -> float:
        return float(max(np.max(np.abs(s - s.conj().T)) for s in self.states))

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh((s + s.conj().T) / 2)[0] for s in self.states))

    def distances(self, other: "PropagationResult", norm: NormName = "fro") -> np.ndarray:
        return np.array([operator_norm(a - b, norm) for a, b in zip(self.states, other.states)])


def operator_norm(m: np.ndarray, norm: NormName = "fro") -> float:
    if norm == "trace":
        return float(np.sum(np.linalg.svd(m, compute_uv=False)))
    return float(np.linalg.norm(m, "fro"))


class ScalingFit(BaseModel):
    """log y = slope log x + intercept, with the standard error of the slope."""

    model_config = ConfigDict(frozen=True)

    slope: float
    intercept: float
    stderr: float
    r_value: float

    def within(self, expected: float, width: float) -> bool:
        return abs(self.slope - expected) <= width


class ErrorScalingReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g_values: RVector
    times: RMatrix
    errors: RMatrix
    dist_to_steady: RMatrix
    norm: NormName = "fro"
    max_errors: RVector
    fit: ScalingFit | None = None
    predicted_exponent: float = 1.0
    noise_floor: bool = False

    @model_validator(mode="after")
    def _non_negative(self) -> "ErrorScalingReport":
        if self.errors.min(initial=0.0) < 0:
            raise ValueError("errors must be non-negative")
        return self


class ApproachReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    g_values: list[float]
    threshold: float
    approach_times: list[float]
    fit: ScalingFit | None = None


class TrackedEigenvalue(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    j: int
    k: int
    predicted: Complex
    numeric: Complex
    ambiguous: bool = False

    @property
    def deviation(self) -> float:
        return abs(self.numeric - self.predicted)


class SpectralGapReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    g: float
    gamma: float
    eta: float | None = None
    delta: float | None = None
    f: float | None = None
    tracked: list[TrackedEigenvalue] = []
    ambiguous: bool = False
    max_real_part: float = Field(le=1e-8)


class SecondOrderFit(BaseModel):
    """lambda_jk(g) + i g (e_j - e_k) ~ c2 g^2 + c3 g^3"""

    model_config = ConfigDict(frozen=True)

    j: int
    k: int
    c2: Complex
    c3: Complex
    predicted: Complex
    relative_error: float
