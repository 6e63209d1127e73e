"""Ground-state search: truncation growth inside a sector, variational choice of j."""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from rich.console import Console

from .config import SolverConfig
from .lanczos import lanczos_lowest
from .model import CoefficientTable, ModelParams, SectorBasis, build_hamiltonian_action, validate_sector

console = Console(stderr=True)


class GroundState(BaseModel):
    """Converged lowest eigenpair of one (params, j) problem."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: ModelParams
    sector: SectorBasis
    energy: float
    coefficients: CoefficientTable
    converged: bool
    n_tr_used: int
    residual: float = Field(default=0.0, ge=0)
    sector_energies: Dict[float, float] = Field(default_factory=dict,
                                                description="Energies of every solved j sector")

    @property
    def j(self) -> float:
        return self.sector.j

    @property
    def c(self) -> np.ndarray:
        return self.coefficients.c


def _singlet_state(params: ModelParams) -> GroundState:
    # j = 0: no spin dynamics, H' = w a+a and the vacuum has energy zero.
    return GroundState(
        params=params,
        sector=SectorBasis(j=0.0, n_tr=0),
        energy=0.0,
        coefficients=CoefficientTable(c=np.ones((1, 1))),
        converged=True,
        n_tr_used=0,
        residual=0.0,
    )


def solve_sector_fixed(params: ModelParams, j: float, n_tr: int,
                       config: Optional[SolverConfig] = None,
                       start: Optional[np.ndarray] = None) -> GroundState:
    """One Lanczos solve at fixed (j, N_tr), without truncation growth."""
    config = config or SolverConfig()
    validate_sector(params, j)
    if j == 0:
        return _singlet_state(params)

    sector = SectorBasis(j=j, n_tr=n_tr)
    action = build_hamiltonian_action(params, sector)
    result = lanczos_lowest(action, sector.dim, config, start=start)
    return GroundState(
        params=params,
        sector=sector,
        energy=result.energy,
        coefficients=result.vector,
        converged=True,
        n_tr_used=n_tr,
        residual=result.residual,
    )


def converge_ground_state(params: ModelParams, j: float,
                          config: Optional[SolverConfig] = None) -> GroundState:
    """Grow N_tr by ``n_tr_step`` until two successive energies agree.

    Returns the last solve with ``converged`` unset when ``n_tr_max`` is reached
    first; the caller decides whether that is acceptable.
    """
    config = config or SolverConfig()
    validate_sector(params, j)
    if j == 0:
        return _singlet_state(params)

    n_tr = config.n_tr_start
    previous: Optional[GroundState] = None
    while True:
        start = None
        if previous is not None:
            rng = np.random.default_rng(config.seed + n_tr)
            start = previous.coefficients.padded(n_tr)
            start += 1e-3 * rng.standard_normal(start.shape)
        current = solve_sector_fixed(params, j, n_tr, config, start=start)

        if previous is not None:
            change = abs(current.energy - previous.energy)
            if change <= max(config.energy_rtol * abs(current.energy), config.energy_floor):
                return current

        if n_tr >= config.n_tr_max:
            console.print(
                f"[yellow]Warning: N_tr cap {config.n_tr_max} reached without convergence "
                f"(N={params.n_atoms}, j={j}, lambda={params.lam}, Omega={params.capital_omega})[/yellow]"
            )
            return current.model_copy(update={"converged": False})

        previous = current
        n_tr = min(n_tr + config.n_tr_step, config.n_tr_max)


def sector_lower_bound(params: ModelParams, j: float) -> float:
    """Rigorous lower bound on the ground energy of sector j.

    The atom-cavity part is bounded below by the minimum of its upper
    (P-)symbol, where a+a -> |alpha|^2 - 1 and S -> (j+1) n for a unit vector n;
    the interaction term satisfies S^2 - S_x^2 >= j inside the sector.
    """
    big_j = j + 1.0
    a = 4.0 * params.lam ** 2 * big_j ** 2 / (params.omega * params.n_atoms)
    b = params.delta * big_j
    if b >= 2.0 * a:
        classical = -b
    else:
        classical = -a - b * b / (4.0 * a)
    return -params.omega + classical + params.omega_prime * j


def _solve_many(params: ModelParams, sectors: Iterable[float],
                config: SolverConfig) -> List[GroundState]:
    sectors = list(sectors)
    if config.workers > 1 and len(sectors) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(lambda j: converge_ground_state(params, j, config), sectors))
    return [converge_ground_state(params, j, config) for j in sectors]


def _pick_lowest(states: List[GroundState]) -> GroundState:
    lowest = min(s.energy for s in states)
    tol = 1e-10 * max(1.0, abs(lowest))
    # Ties go to the larger j.
    return max((s for s in states if s.energy <= lowest + tol), key=lambda s: s.j)


def ground_state(params: ModelParams, config: Optional[SolverConfig] = None) -> GroundState:
    """Variational ground state over all admissible j = N/2 - r.

    With ``prune_sectors`` the j = N/2 sector is solved first and any sector
    whose ``sector_lower_bound`` lies above that energy is skipped; the
    selected sector is the same as in the exhaustive search.
    """
    config = config or SolverConfig()
    candidates = params.admissible_j()

    if config.prune_sectors:
        first = converge_ground_state(params, candidates[0], config)
        ceiling = first.energy + 1e-9 * max(1.0, abs(first.energy))
        rest = [j for j in candidates[1:] if sector_lower_bound(params, j) <= ceiling]
        states = [first] + _solve_many(params, rest, config)
    else:
        states = _solve_many(params, candidates, config)

    winner = _pick_lowest(states)
    if not winner.converged:
        console.print(f"[yellow]Warning: winning sector j={winner.j} did not converge[/yellow]")
    energies = {s.j: s.energy for s in states}
    return winner.model_copy(update={"sector_energies": energies})


def competing_sector(params: ModelParams, reference: GroundState,
                     config: Optional[SolverConfig] = None) -> Optional[float]:
    """Return a j that beats ``reference`` at ``params``, or None.

    Only sectors whose lower bound does not exclude them are solved.
    """
    config = config or SolverConfig()
    ceiling = reference.energy + 1e-9 * max(1.0, abs(reference.energy))
    rest = [j for j in params.admissible_j()
            if j != reference.j and sector_lower_bound(params, j) <= ceiling]
    if not rest:
        return None
    winner = _pick_lowest([reference] + _solve_many(params, rest, config))
    return None if winner.j == reference.j else winner.j


def forced_jmax_ground_state(params: ModelParams, config: Optional[SolverConfig] = None) -> GroundState:
    """Lowest state with j fixed to N/2, as in the pure Dicke treatment."""
    return converge_ground_state(params, params.j_max, config)
