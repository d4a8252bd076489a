from contextlib import contextmanager
from contextvars import ContextVar
from pathlib import Path
from typing import Iterator, cast

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()

TOOL_VERSION = "0.1.0"

PROJECT_ROOT = Path(__file__).parent


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="QRM_")

    # Upper bound on n_a * n_c * n_b (superoperators are dim^2 x dim^2)
    dim_cap: int = 64

    # Absolute tolerance on Hermiticity, commutators and traces
    herm_tol: float = 1e-12
    # Relative singular value cutoff for ranks and null spaces
    null_tol: float = 1e-9
    spectral_tol: float = 1e-8
    residual_tol: float = 1e-9
    clamp_tol: float = 1e-12
    # Relative threshold under which two Bohr frequencies count as equal
    gap_tol: float = 1e-8

    series_order: int = 6
    seed: int = 20190601

    output_dir: str = "results"

    @property
    def output_path(self) -> Path:
        path = Path(self.output_dir)
        if not path.is_absolute():
            path = PROJECT_ROOT / path
        return path

    def tolerances(self) -> dict[str, float]:
        return {
            "herm_tol": self.herm_tol,
            "null_tol": self.null_tol,
            "spectral_tol": self.spectral_tol,
            "residual_tol": self.residual_tol,
            "clamp_tol": self.clamp_tol,
            "gap_tol": self.gap_tol,
        }


def get_env_or_die():
    settings = Settings()

    if settings.dim_cap < 1:
        raise ValueError("QRM_DIM_CAP must be at least 1")

    for name, value in settings.tolerances().items():
        if not value > 0:
            raise ValueError(f"QRM_{name.upper()} must be positive, got {value}")

    if settings.series_order < 0:
        raise ValueError("QRM_SERIES_ORDER must be non-negative")

    return settings


_ACTIVE: ContextVar[Settings] = ContextVar("qrm_settings", default=get_env_or_die())


class ActiveSettings:
    """Read-only view of the settings of the innermost use_settings block."""

    def __getattr__(self, name: str):
        return getattr(_ACTIVE.get(), name)

    def __setattr__(self, name: str, value) -> None:
        raise AttributeError(f"cannot set {name}: settings are read-only, override them with use_settings")


@contextmanager
def use_settings(settings: Settings) -> Iterator[Settings]:
    token = _ACTIVE.set(settings)
    try:
        yield settings
    finally:
        _ACTIVE.reset(token)


ENV_SETTINGS = cast(Settings, ActiveSettings())
