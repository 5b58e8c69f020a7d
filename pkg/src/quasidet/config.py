from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ParameterError


_U64_MAX = 2**64 - 1


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    half_width_in_sigmas: float = Field(default=12.0, gt=0)
    points: int = Field(default=4096, ge=64)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    g: float = Field(default=0.05, gt=0, allow_inf_nan=False)
    sigma: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    shots: int = Field(default=200_000, ge=1)
    seed: int = Field(default=20100108, ge=0, le=_U64_MAX)
    readout: Literal["position", "momentum"] = "position"
    grid: GridConfig = GridConfig()
    # extrapolation couplings in units of sigma
    couplings: list[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    shard_size: int = Field(default=50_000, ge=1)
    workers: int = Field(default=1, ge=1, le=64)

    @model_validator(mode="after")
    def _check_couplings(self) -> "SimConfig":
        for c in self.couplings:
            if not (c > 0):
                raise ValueError(f"couplings must be positive, got {c}")
        return self

    def with_coupling(self, g: float) -> "SimConfig":
        return self.model_copy(update={"g": float(g)})

    def coupling_values(self) -> list[float]:
        return [c * self.sigma for c in self.couplings]


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    ortho_eps: float = Field(default=1e-12, gt=0)
    hermiticity: float = Field(default=1e-10, gt=0)
    identity: float = Field(default=1e-10, gt=0)
    basis: float = Field(default=1e-10, gt=0)
    imag_flag: float = Field(default=1e-10, gt=0)


class TomographyDefaults(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shots: int = Field(default=200_000, ge=1)
    couplings: list[float] = Field(default_factory=lambda: [0.2, 0.35, 0.5])
    mode: Literal["hermitian-part", "complex"] = "hermitian-part"
    source: Literal["exact", "simulated"] = "exact"


class PathsConfig(BaseModel):
    logs_dir: Path = Path("./logs")
    out_dir: Path = Path("./out")


class OutputConfig(BaseModel):
    format: Literal["csv", "json"] = "csv"


class AppConfig(BaseModel):
    tolerances: Tolerances = Tolerances()
    simulation: SimConfig = SimConfig()
    tomography: TomographyDefaults = TomographyDefaults()
    paths: PathsConfig = PathsConfig()
    output: OutputConfig = OutputConfig()
    log_level: str = "INFO"

    def resolve_paths(self, base_dir: Path) -> "AppConfig":
        base_dir = base_dir.resolve()
        return self.model_copy(
            update={
                "paths": self.paths.model_copy(
                    update={
                        "logs_dir": (base_dir / self.paths.logs_dir).resolve()
                        if not self.paths.logs_dir.is_absolute()
                        else self.paths.logs_dir.resolve(),
                        "out_dir": (base_dir / self.paths.out_dir).resolve()
                        if not self.paths.out_dir.is_absolute()
                        else self.paths.out_dir.resolve(),
                    }
                )
            }
        )


def load_config(path: Optional[Path] = None) -> AppConfig:
    if path is None:
        env_path = os.environ.get("QUASIDET_CONFIG")
        path = Path(env_path) if env_path else Path("quasidet.yaml")
        if not path.exists():
            cfg = AppConfig()
            return cfg.resolve_paths(Path.cwd())
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ParameterError(f"config {path} must be a YAML mapping")
    cfg = AppConfig.model_validate(raw)
    return cfg.resolve_paths(path.parent)
