import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from env_settings import ENV_SETTINGS
from utils.models.matrix import CMatrix, RMatrix


class RateMatrix(BaseModel):
    """Generator of a continuous-time Markov chain, rows summing to zero.

    q[i, j] (i != j) is the jump rate from state i to state j.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    q: RMatrix
    labels: list[str] = []
    basis: CMatrix | None = None
    coup_holds: bool | None = None

    @model_validator(mode="after")
    def _row_infinitesimal_stochastic(self) -> "RateMatrix":
        n = self.q.shape[0]
        if self.q.shape != (n, n):
            raise ValueError(f"rate matrix must be square, got {self.q.shape}")
        scale = max(1.0, float(np.max(np.abs(self.q), initial=0.0)))
        off_diagonal = self.q[~np.eye(n, dtype=bool)]
        if off_diagonal.size and off_diagonal.min() < -ENV_SETTINGS.residual_tol * scale:
            raise ValueError(f"negative jump rate {off_diagonal.min():.3e}")
        rows = float(np.max(np.abs(self.q.sum(axis=1))))
        if rows > ENV_SETTINGS.residual_tol * scale:
            raise ValueError(f"rows of the rate matrix sum to {rows:.3e}, expected 0")
        if self.labels and len(self.labels) != n:
            raise ValueError(f"{len(self.labels)} labels for {n} states")
        return self

    @property
    def n_states(self) -> int:
        return self.q.shape[0]

    @property
    def jump_rates(self) -> np.ndarray:
        """Exponential holding rate of each state."""
        return -np.diag(self.q)

    @property
    def embedded_chain(self) -> np.ndarray:
        """Jump chain transition matrix; absorbing states stay put."""
        rates = self.jump_rates
        p = np.zeros_like(self.q)
        for i, rate in enumerate(rates):
            if rate > 0:
                p[i] = self.q[i] / rate
                p[i, i] = 0.0
            else:
                p[i, i] = 1.0
        return p

    def mean_first_passage_times(self, target: int | list[int]) -> np.ndarray:
        """Expected time to hit the target set from each state."""
        is_source = np.ones(self.n_states, dtype=bool)
        is_source[target] = False
        sub = self.q[np.ix_(is_source, is_source)]
        mfpt = np.zeros(self.n_states)
        mfpt[is_source] = np.linalg.solve(sub, -np.ones(int(is_source.sum())))
        return mfpt


class TransitionKernel(BaseModel):
    """P(s)[i, j] = P(X_s = j | X_0 = i)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s: float
    p: RMatrix
    clamped: float = 0.0

    @model_validator(mode="after")
    def _row_stochastic(self) -> "TransitionKernel":
        if self.s < 0:
            raise ValueError(f"time must be non-negative, got {self.s}")
        if self.p.min(initial=0.0) < 0:
            raise ValueError("transition probabilities must be non-negative")
        rows = float(np.max(np.abs(self.p.sum(axis=1) - 1.0)))
        if rows > 1e-10:
            raise ValueError(f"rows of the transition kernel deviate from 1 by {rows:.3e}")
        return self

    def probability(self, i: int, j: int) -> float:
        return float(self.p[i, j])
