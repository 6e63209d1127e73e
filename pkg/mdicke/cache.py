"""Content-addressed on-disk cache of solved ground states."""

import hashlib
import io
import json
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from rich.console import Console

from .config import SolverConfig
from .model import CoefficientTable, ModelParams, SectorBasis
from .solver import GroundState
from .tools.fs import atomic_write_bytes

console = Console(stderr=True)

CACHE_FORMAT = 1


def cache_key(params: ModelParams, config: SolverConfig, kind: str = "ground") -> str:
    """SHA-256 of the canonical JSON of (kind, params, solver config); floats are exact."""
    payload = {
        "format": CACHE_FORMAT,
        "kind": kind,
        "params": params.model_dump(),
        "solver": config.model_dump(exclude={"workers"}),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class GroundStateCache:
    """Stores energy and coefficients per key as ``<key>.npz``.

    A cache without a directory, or with ``enabled=False``, never hits and
    never writes. Unreadable entries count as misses.
    """

    def __init__(self, directory: Optional[Path], enabled: bool = True):
        self.directory = Path(directory) if directory is not None else None
        self.enabled = enabled and self.directory is not None
        self.hits = 0
        self.misses = 0
        if self.enabled:
            self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    def lookup(self, params: ModelParams, config: SolverConfig,
               kind: str = "ground") -> Optional[GroundState]:
        if not self.enabled:
            self.misses += 1
            return None

        path = self._path(cache_key(params, config, kind))
        if not path.exists():
            self.misses += 1
            return None

        try:
            with np.load(path, allow_pickle=False) as data:
                j = float(data["j"])
                state = GroundState(
                    params=params,
                    sector=SectorBasis(j=j, n_tr=int(data["n_tr_used"])),
                    energy=float(data["energy"]),
                    coefficients=CoefficientTable(c=np.array(data["c"])),
                    converged=bool(data["converged"]),
                    n_tr_used=int(data["n_tr_used"]),
                    residual=float(data["residual"]),
                    sector_energies=dict(zip(map(float, data["sector_j"]),
                                             map(float, data["sector_energy"]))),
                )
            if state.c.shape != state.sector.shape:
                raise ValueError(f"coefficient shape {state.c.shape} does not match sector")
        except Exception as e:
            console.print(f"[yellow]Warning: Ignoring corrupt cache entry {path.name}: {e}[/yellow]")
            self.misses += 1
            return None

        self.hits += 1
        return state

    def store(self, state: GroundState, config: SolverConfig, kind: str = "ground") -> None:
        if not self.enabled:
            return
        js = sorted(state.sector_energies)
        buffer = io.BytesIO()
        np.savez(
            buffer,
            j=state.j,
            energy=state.energy,
            c=state.c,
            converged=state.converged,
            n_tr_used=state.n_tr_used,
            residual=state.residual,
            sector_j=np.array(js, dtype=float),
            sector_energy=np.array([state.sector_energies[j] for j in js], dtype=float),
        )
        atomic_write_bytes(self._path(cache_key(state.params, config, kind)), buffer.getvalue())

    def fetch(self, params: ModelParams, config: SolverConfig,
              solve: Callable[[ModelParams, SolverConfig], GroundState],
              kind: str = "ground") -> GroundState:
        """Cached state for the key, solving and storing it on a miss."""
        state = self.lookup(params, config, kind)
        if state is None:
            state = solve(params, config)
            self.store(state, config, kind)
        return state
