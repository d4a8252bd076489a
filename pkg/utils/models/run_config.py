from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from env_settings import ENV_SETTINGS

Subcommand = Literal["spectrum", "steady", "coup", "markov", "dynamics", "example", "verify"]
PresetName = Literal["three-qubit", "qubit-n-qubit"]
OutputFormat = Literal["json", "csv"]


def parse_grid(text: str) -> list[float]:
    """'a:b:n' (linear) or 'a:b:n:log' (log spaced), or a comma separated list."""
    text = text.strip()
    if ":" not in text:
        try:
            return [float(x) for x in text.split(",") if x.strip()]
        except ValueError as e:
            raise ValueError(f"cannot parse grid {text!r}: {e}") from e

    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise ValueError(f"grid must look like a:b:n or a:b:n:log, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ValueError(f"cannot parse grid {text!r}: {e}") from e
    if count < 1:
        raise ValueError(f"grid needs at least one point, got {count}")
    if len(parts) == 4:
        if start <= 0 or stop <= 0:
            raise ValueError("log grids need positive end points")
        return np.geomspace(start, stop, count).tolist()
    return np.linspace(start, stop, count).tolist()


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    subcommand: Subcommand
    model_path: Path | None = None
    preset: PresetName | None = None
    overrides: dict[str, str] = {}
    drive: bool = False

    g: float | None = None
    g_grid: list[float] | None = None
    t_grid: list[float] | None = None
    order: int = Field(default=ENV_SETTINGS.series_order, ge=0)
    tolerances: dict[str, float] = {}
    seed: int = ENV_SETTINGS.seed

    out_dir: Path = ENV_SETTINGS.output_path
    format: OutputFormat = "json"
    only: list[str] | None = None
    command: str = ""

    @field_validator("g_grid", "t_grid")
    @classmethod
    def _increasing(cls, grid: list[float] | None) -> list[float] | None:
        if grid is None:
            return grid
        if len(grid) == 0:
            raise ValueError("grid must not be empty")
        if not np.all(np.isfinite(grid)):
            raise ValueError("grid entries must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        return grid

    @field_validator("tolerances")
    @classmethod
    def _known_tolerances(cls, values: dict[str, float]) -> dict[str, float]:
        known = ENV_SETTINGS.tolerances()
        for name, value in values.items():
            if name not in known:
                raise ValueError(f"unknown tolerance {name!r}, expected one of {sorted(known)}")
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        return values

    @model_validator(mode="after")
    def _one_model_source(self) -> "RunConfig":
        if self.subcommand == "verify":
            return self
        if self.subcommand == "example" and self.preset is None:
            raise ValueError("example needs --preset")
        if (self.model_path is None) == (self.preset is None):
            raise ValueError("give exactly one of --model and --preset")
        if self.overrides and self.preset is None:
            raise ValueError("--set only applies to presets")
        return self

    @property
    def g_values(self) -> list[float] | None:
        """--g-grid, else --g as a one-point grid, else None."""
        if self.g_grid is not None:
            return self.g_grid
        if self.g is not None:
            return [self.g]
        return None
