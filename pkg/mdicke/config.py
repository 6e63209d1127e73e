"""Configuration management for solver runs and the batch front-end."""

import os
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import numpy as np
from dotenv import dotenv_values, find_dotenv, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError

COMMANDS = ("point", "sweep", "phase-diagram", "fs-scan", "scaling")


class SolverConfig(BaseModel):
    """Tolerances and truncation schedule of the ground-state solver."""

    model_config = ConfigDict(frozen=True)

    energy_rtol: float = Field(default=1e-8, gt=0, description="Relative energy change that stops N_tr growth")
    lanczos_tol: float = Field(default=1e-10, gt=0, description="Lanczos residual tolerance relative to |E|")
    residual_floor: float = Field(default=1e-14, gt=0, description="Absolute floor of the residual tolerance near E = 0")
    energy_floor: float = Field(default=1e-12, gt=0, description="Absolute floor of the energy-change test near E = 0")
    n_tr_start: int = Field(default=8, gt=0, description="Initial boson truncation")
    n_tr_step: int = Field(default=8, gt=0, description="Truncation growth increment")
    n_tr_max: int = Field(default=512, gt=0, description="Hard cap on the truncation")
    max_lanczos_iters: int = Field(default=2000, gt=0, description="Lanczos iteration cap")
    check_every: int = Field(default=5, gt=0, description="Lanczos convergence check interval")
    seed: int = Field(default=1234, ge=0, description="Seed of the Lanczos start vector")
    prune_sectors: bool = Field(default=True, description="Skip j sectors excluded by the lower bound")
    workers: int = Field(default=1, gt=0, description="Threads used for independent j sectors")

    @model_validator(mode="after")
    def _start_below_cap(self) -> "SolverConfig":
        if self.n_tr_start > self.n_tr_max:
            raise ValueError("n_tr_start must not exceed n_tr_max")
        return self


class GridSpec(BaseModel):
    """Uniform grid written as ``start:stop:count``."""

    model_config = ConfigDict(frozen=True)

    start: float
    stop: float
    count: int = Field(default=1, ge=1)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = [p.strip() for p in str(text).split(":")]
        try:
            if len(parts) == 1:
                value = float(parts[0])
                return cls(start=value, stop=value, count=1)
            if len(parts) == 3:
                return cls(start=float(parts[0]), stop=float(parts[1]), count=int(parts[2]))
        except ValueError as e:
            raise ConfigError(f"Invalid grid '{text}': {e}") from e
        raise ConfigError(f"Invalid grid '{text}': expected start:stop:count")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)

    def __str__(self) -> str:
        return f"{self.start!r}:{self.stop!r}:{self.count}"


class RunConfig(BaseModel):
    """Complete description of one batch run."""

    model_config = ConfigDict(frozen=True)

    command: str = Field(..., description="One of point, sweep, phase-diagram, fs-scan, scaling")
    n_atoms: List[int] = Field(default_factory=lambda: [4], description="Atom counts N")
    omega: float = Field(default=1.0, gt=0, description="Cavity frequency")
    delta: float = Field(default=1.0, ge=0, description="Qubit splitting")
    lam: GridSpec = Field(default_factory=lambda: GridSpec(start=0.5, stop=0.5), description="lambda grid")
    capital_omega: GridSpec = Field(default_factory=lambda: GridSpec(start=0.0, stop=0.0), description="Omega grid")
    omega_prime: Optional[GridSpec] = Field(default=None, description="2 Omega / N grid (overrides Omega)")
    delta_lambda: float = Field(default=1e-3, gt=0, description="Fidelity susceptibility step")
    solver: SolverConfig = Field(default_factory=SolverConfig)
    out: Path = Field(default=Path("mdicke-out.csv"), description="Output path")
    cache_dir: Optional[Path] = Field(default=None, description="Ground-state cache directory")
    width: int = Field(default=1, ge=1, description="Worker processes for grid points")

    @field_validator("command")
    @classmethod
    def _known_command(cls, value: str) -> str:
        if value not in COMMANDS:
            raise ValueError(f"unknown command '{value}', expected one of {', '.join(COMMANDS)}")
        return value

    @field_validator("n_atoms")
    @classmethod
    def _positive_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(n < 1 for n in value):
            raise ValueError("atom counts must be positive")
        return value

    def omega_values(self, n_atoms: int) -> np.ndarray:
        """Omega grid for one atom count, derived from Omega' when given."""
        if self.omega_prime is not None:
            return self.omega_prime.values() * n_atoms / 2.0
        return self.capital_omega.values()


# Keys accepted in config files and MDICKE_* variables, mapped to RunConfig fields.
_KEY_ALIASES: Dict[str, str] = {
    "command": "command",
    "n": "n_atoms",
    "n_atoms": "n_atoms",
    "omega": "omega",
    "delta": "delta",
    "lambda": "lam",
    "lam": "lam",
    "omega_cap": "capital_omega",
    "capital_omega": "capital_omega",
    "omega_prime": "omega_prime",
    "delta_lambda": "delta_lambda",
    "out": "out",
    "cache": "cache_dir",
    "cache_dir": "cache_dir",
    "width": "width",
    "seed": "seed",
    "energy_rtol": "energy_rtol",
    "lanczos_tol": "lanczos_tol",
    "residual_floor": "residual_floor",
    "energy_floor": "energy_floor",
    "n_tr_start": "n_tr_start",
    "n_tr_step": "n_tr_step",
    "n_tr_max": "n_tr_max",
    "max_lanczos_iters": "max_lanczos_iters",
    "prune_sectors": "prune_sectors",
}

_SOLVER_KEYS = {"seed", "energy_rtol", "lanczos_tol", "residual_floor", "energy_floor",
                "n_tr_start", "n_tr_step", "n_tr_max",
                "max_lanczos_iters", "prune_sectors"}


def _normalize_key(key: str) -> str:
    raw = key.strip().lstrip("-")
    # "Omega" (interatomic) and "omega" (cavity) differ only by case.
    if raw in ("Omega", "OMEGA_CAP"):
        return "capital_omega"
    if raw in ("Omega-prime", "Omega_prime"):
        return "omega_prime"
    if raw == "N":
        return "n_atoms"
    normalized = raw.lower().replace("-", "_")
    if normalized not in _KEY_ALIASES:
        raise ConfigError(f"Unknown configuration key '{key}'")
    return _KEY_ALIASES[normalized]


def _env_layer() -> Dict[str, str]:
    """MDICKE_* variables from the environment (and a .env file, if present)."""
    load_dotenv(find_dotenv(usecwd=True))
    layer = {}
    for name, field in (("MDICKE_CACHE_DIR", "cache_dir"), ("MDICKE_WIDTH", "width"),
                        ("MDICKE_SEED", "seed")):
        value = os.getenv(name)
        if value:
            layer[field] = value
    return layer


def _file_layer(config_file: Path) -> Dict[str, str]:
    if not config_file.exists():
        raise ConfigError(f"Config file '{config_file}' does not exist")
    layer = {}
    for key, value in dotenv_values(config_file).items():
        if value is None or value == "":
            continue
        layer[_normalize_key(key)] = value
    return layer


def _build(values: Mapping[str, object]) -> RunConfig:
    solver = {k: v for k, v in values.items() if k in _SOLVER_KEYS and v is not None}
    fields = {k: v for k, v in values.items() if k not in _SOLVER_KEYS and v is not None}

    for key in ("lam", "capital_omega", "omega_prime"):
        if key in fields and not isinstance(fields[key], GridSpec):
            fields[key] = GridSpec.parse(str(fields[key]))
    if "n_atoms" in fields and isinstance(fields["n_atoms"], str):
        text = fields["n_atoms"]
        try:
            if "," in text:
                fields["n_atoms"] = [int(part) for part in text.split(",") if part.strip()]
            else:
                fields["n_atoms"] = [int(round(v)) for v in GridSpec.parse(text).values()]
        except ValueError as e:
            raise ConfigError(f"Invalid atom counts '{text}': {e}") from e
    elif "n_atoms" in fields and isinstance(fields["n_atoms"], int):
        fields["n_atoms"] = [fields["n_atoms"]]

    if "prune_sectors" in solver and isinstance(solver["prune_sectors"], str):
        solver["prune_sectors"] = solver["prune_sectors"].strip().lower() in ("1", "true", "yes", "on")

    try:
        return RunConfig(solver=SolverConfig(**solver), **fields)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_run_config(config_file: Optional[Path] = None,
                    overrides: Optional[Mapping[str, object]] = None) -> RunConfig:
    """Resolve a RunConfig from environment, config file and explicit overrides.

    Later layers win. Config files are flat ``key=value`` text whose keys
    mirror the CLI flags (``N``, ``lambda``, ``Omega``, ``Omega-prime``, ...).
    """
    values: Dict[str, object] = {}
    values.update(_env_layer())
    if config_file is not None:
        values.update(_file_layer(Path(config_file)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[_normalize_key(key)] = value

    if "command" not in values:
        raise ConfigError("No command given (use --command or a 'command=' line in the config file)")
    return _build(values)
