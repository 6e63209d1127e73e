"""Physical observables of converged ground states.

All spin quantities refer to the rotated frame in which the solver works
(S_z there is the original S_x). The rotation is the same single-atom unitary
on every atom, so pairwise entanglement is frame independent.
"""

from math import sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import SolverConfig
from .errors import (
    GridError,
    InvalidDensityMatrixError,
    NotConvergedError,
    ParameterMismatchError,
    SectorChangeError,
    SectorError,
)
from .kernels import displacement_matrix
from .model import ModelParams, ladder_factors
from .solver import GroundState, competing_sector, ground_state, solve_sector_fixed

_SIGMA_YY = np.array([
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0, 0.0],
])


class ObservableRecord(BaseModel):
    """Per-point observables; optional entries are None where undefined."""

    model_config = ConfigDict(frozen=True)

    energy_per_atom: float
    d2E_dlambda2: Optional[float] = None
    photons_per_atom: float = Field(..., ge=0)
    sz_mean: float
    j: float
    fs_avg: Optional[float] = Field(default=None, ge=0)
    concurrence: Optional[float] = Field(default=None, ge=0, le=1)
    scaled_concurrence: Optional[float] = None


class TwoAtomRDM(BaseModel):
    """Two-atom density matrix in the basis {uu, ud, du, dd}."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


class CurvatureProfile:
    """Second derivative of E(lambda) with flagged first-order spikes."""

    def __init__(self, lambdas: np.ndarray, values: np.ndarray, spikes: List[Tuple[float, float]]):
        self.lambdas = lambdas
        self.values = values  # NaN at both endpoints
        self.spikes = spikes

    @property
    def interior(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.lambdas[1:-1], self.values[1:-1]


def _require_converged(gs: GroundState) -> None:
    if not gs.converged:
        raise NotConvergedError(
            f"ground state at lambda={gs.params.lam}, j={gs.j} is not converged"
        )


def _displacements(gs: GroundState, lam: Optional[float] = None) -> np.ndarray:
    p = gs.params
    lam = p.lam if lam is None else lam
    return 2.0 * lam * gs.sector.magnetic_indices() / (p.omega * sqrt(p.n_atoms))


def _quadrature(c: np.ndarray) -> np.ndarray:
    """Row-wise <phi_n|(A_n + A_n^+)|phi_n>."""
    if c.shape[1] < 2:
        return np.zeros(c.shape[0])
    root = np.sqrt(np.arange(1, c.shape[1], dtype=float))
    return 2.0 * np.sum(root * c[:, :-1] * c[:, 1:], axis=1)


def photon_number(gs: GroundState) -> float:
    """<a+a> of the full atom-boson state, using a = A_n - g_n in every block."""
    _require_converged(gs)
    c = gs.c
    g = _displacements(gs)
    weights = np.sum(c * c, axis=1)
    number = np.sum(np.arange(c.shape[1]) * c * c)
    return float(number - np.sum(g * _quadrature(c)) + np.sum(g * g * weights))


def sz_expectation(gs: GroundState) -> float:
    """<S_z> in the rotated frame."""
    _require_converged(gs)
    return float(np.sum(gs.sector.magnetic_indices() * np.sum(gs.c ** 2, axis=1)))


def hellmann_feynman_slope(gs: GroundState) -> float:
    """dE/dlambda = (2/sqrt(N)) <(a+ + a) S_z>."""
    _require_converged(gs)
    c = gs.c
    n = gs.sector.magnetic_indices()
    g = _displacements(gs)
    field = _quadrature(c) - 2.0 * g * np.sum(c * c, axis=1)
    return float(2.0 / sqrt(gs.params.n_atoms) * np.sum(n * field))


def energy_second_derivative(lambdas: Sequence[float], energies: Sequence[float],
                             window: int = 3, spike_factor: float = 10.0,
                             spike_floor: float = 1e-3) -> CurvatureProfile:
    """Central second differences of E(lambda) on a uniform grid.

    A point is flagged when the value is negative and its magnitude exceeds
    ``spike_factor`` times the median magnitude of its neighbourhood
    (``window`` points each side) plus ``spike_floor``. Adjacent flagged points
    are merged into one spike, reported at the most negative value.
    """
    x = np.asarray(lambdas, dtype=float)
    y = np.asarray(energies, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise GridError("need at least three (lambda, E) points of matching length")
    steps = np.diff(x)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
        raise GridError("lambda grid must be strictly increasing and uniform")

    h = steps[0]
    values = np.full(x.size, np.nan)
    values[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h)

    inner = np.abs(values[1:-1])
    flagged = np.zeros(x.size, dtype=bool)
    for i in range(1, x.size - 1):
        lo, hi = max(0, i - 1 - window), min(inner.size, i + window)
        local = np.median(inner[lo:hi])
        flagged[i] = values[i] < 0 and abs(values[i]) > spike_factor * local + spike_floor

    spikes = []
    i = 1
    while i < x.size - 1:
        if flagged[i]:
            start = i
            while i + 1 < x.size - 1 and flagged[i + 1]:
                i += 1
            block = range(start, i + 1)
            k = min(block, key=lambda idx: values[idx])
            spikes.append((float(x[k]), float(values[k])))
        i += 1
    return CurvatureProfile(x, values, spikes)


def _same_model(a: ModelParams, b: ModelParams) -> bool:
    return (a.omega, a.delta, a.capital_omega, a.n_atoms) == (b.omega, b.delta, b.capital_omega, b.n_atoms)


def fidelity(gs1: GroundState, gs2: GroundState) -> float:
    """|<psi(lambda_1)|psi(lambda_2)>| between ground states of one model.

    States in different j sectors are orthogonal. Within a sector the boson
    blocks overlap through <l|_{A_n(l1)} |k>_{A_n(l2)} = <l|D(g_n(l1) - g_n(l2))|k>.
    """
    if not _same_model(gs1.params, gs2.params):
        raise ParameterMismatchError("fidelity needs equal (omega, delta, Omega, N)")
    if gs1.j != gs2.j:
        return 0.0

    c1, c2 = gs1.c, gs2.c
    shifts = _displacements(gs1) - _displacements(gs2)
    total = 0.0
    for row, shift in enumerate(shifts):
        block = displacement_matrix(shift, c1.shape[1], c2.shape[1])
        total += c1[row] @ block @ c2[row]
    return abs(float(total))


def fidelity_susceptibility(params: ModelParams, delta_lambda: float,
                            config: Optional[SolverConfig] = None,
                            center: Optional[GroundState] = None) -> float:
    """Average fidelity susceptibility chi_F / N = 2 (1 - F) / (N dl^2).

    F is taken between lambda - dl/2 and lambda + dl/2 (one-sided at lambda <
    dl/2). Both sides are solved in the sector and truncation of the centre
    point. Raises SectorChangeError if another j sector wins at either side.
    """
    if delta_lambda <= 0:
        raise ValueError("delta_lambda must be positive")
    config = config or SolverConfig()
    center = center or ground_state(params, config)
    _require_converged(center)

    lo = params.lam - 0.5 * delta_lambda
    hi = params.lam + 0.5 * delta_lambda
    if lo < 0:
        lo, hi = params.lam, params.lam + delta_lambda

    sides = []
    for lam in (lo, hi):
        side_params = params.with_lambda(lam)
        side = solve_sector_fixed(side_params, center.j, center.n_tr_used, config,
                                  start=center.c)
        rival = competing_sector(side_params, side, config)
        if rival is not None:
            raise SectorChangeError(
                f"ground sector changes from j={center.j} to j={rival} near lambda={lam}"
            )
        sides.append(side)

    overlap = fidelity(sides[0], sides[1])
    return 2.0 * max(0.0, 1.0 - overlap) / (params.n_atoms * delta_lambda ** 2)


def collective_moments(gs: GroundState) -> Dict[str, float]:
    """Collective spin expectation values over the full atom-boson state.

    Returned keys: sz, sz2, sm (= <S+> for the real states used here), sm2,
    pm_sym (<S+S- + S-S+>) and zm_sym (<S_z S- + S- S_z>).
    """
    _require_converged(gs)
    c = gs.c
    j = gs.j
    n = gs.sector.magnetic_indices()
    weights = np.sum(c * c, axis=1)
    jm, _ = ladder_factors(j, n)

    moments = {
        "sz": float(np.sum(n * weights)),
        "sz2": float(np.sum(n * n * weights)),
        "pm_sym": float(np.sum(2.0 * (j * (j + 1.0) - n * n) * weights)),
        "sm": 0.0,
        "sm2": 0.0,
        "zm_sym": 0.0,
    }
    size = c.shape[1]
    G = gs.params.displacement_step
    if c.shape[0] > 1:
        # <phi_{n-1}|phi_n> = c_{n-1}^T D(-G) c_n
        near = np.sum((c[:-1] @ displacement_matrix(G, size).T) * c[1:], axis=1)
        lowering = 2.0 * jm[1:]
        moments["sm"] = float(np.sum(lowering * near))
        moments["zm_sym"] = float(np.sum((n[:-1] + n[1:]) * lowering * near))
    if c.shape[0] > 2:
        far = np.sum((c[:-2] @ displacement_matrix(2.0 * G, size).T) * c[2:], axis=1)
        moments["sm2"] = float(np.sum(4.0 * jm[2:] * jm[1:-1] * far))
    return moments


def two_atom_rdm(gs: GroundState) -> TwoAtomRDM:
    """Reduced density matrix of any two atoms, bosons traced out.

    Valid in the permutation-symmetric sector j = N/2, where every pair has
    the same state and the matrix follows from collective moments.
    """
    N = gs.params.n_atoms
    if N < 2:
        raise SectorError("two-atom reduction needs N >= 2")
    if gs.j != gs.params.j_max:
        raise SectorError(f"two-atom reduction needs j = N/2 = {gs.params.j_max}, got j = {gs.j}")
    m = collective_moments(gs)

    pairs = N * (N - 1.0)
    zz = (4.0 * m["sz2"] - N) / pairs
    up_up = 0.25 * (1.0 + 4.0 * m["sz"] / N + zz)
    down_down = 0.25 * (1.0 - 4.0 * m["sz"] / N + zz)
    mixed = 0.25 * (1.0 - zz)
    flip = (N * N / 4.0 - m["sz2"]) / pairs
    double = m["sm2"] / pairs
    upper = (0.5 * m["zm_sym"] + 0.5 * (N - 1.0) * m["sm"]) / pairs
    lower = (0.5 * (N - 1.0) * m["sm"] - 0.5 * m["zm_sym"]) / pairs

    rho = np.array([
        [up_up, upper, upper, double],
        [upper, mixed, flip, lower],
        [upper, flip, mixed, lower],
        [double, lower, lower, down_down],
    ])
    return TwoAtomRDM(matrix=rho)


def concurrence_wootters(rdm) -> float:
    """Wootters concurrence max(0, s1 - s2 - s3 - s4) of a two-qubit state.

    ``s_i`` are square roots of the descending eigenvalues of
    rho (sy x sy) rho* (sy x sy). Accepts a TwoAtomRDM or a 4x4 array.
    """
    rho = rdm.matrix if isinstance(rdm, TwoAtomRDM) else np.asarray(rdm)
    if rho.shape != (4, 4):
        raise InvalidDensityMatrixError(f"expected a 4x4 matrix, got {rho.shape}")
    floor = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if floor < -1e-8:
        raise InvalidDensityMatrixError(f"density matrix has eigenvalue {floor:.3e}")

    spin_flipped = rho @ _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    mu = np.sort(np.abs(np.real(np.linalg.eigvals(spin_flipped))))[::-1]
    roots = np.sqrt(mu)
    return float(max(0.0, roots[0] - roots[1] - roots[2] - roots[3]))


def scaled_concurrence(gs: GroundState, convention: str = "n_minus_one") -> float:
    """(N-1) C, or N C with ``convention="n"``."""
    factor = {"n_minus_one": gs.params.n_atoms - 1.0, "n": float(gs.params.n_atoms)}
    if convention not in factor:
        raise ValueError(f"unknown scaled-concurrence convention '{convention}'")
    return factor[convention] * concurrence_wootters(two_atom_rdm(gs))


def observable_record(gs: GroundState, d2E_dlambda2: Optional[float] = None,
                      fs_avg: Optional[float] = None) -> ObservableRecord:
    """Collect the per-point observables; concurrence only in the j = N/2 sector."""
    _require_converged(gs)
    N = gs.params.n_atoms
    concurrence = scaled = None
    if N >= 2 and gs.j == gs.params.j_max:
        concurrence = min(1.0, concurrence_wootters(two_atom_rdm(gs)))
        scaled = (N - 1.0) * concurrence
    return ObservableRecord(
        energy_per_atom=gs.energy / N,
        d2E_dlambda2=d2E_dlambda2,
        photons_per_atom=max(0.0, photon_number(gs)) / N,
        sz_mean=sz_expectation(gs),
        j=gs.j,
        fs_avg=fs_avg,
        concurrence=concurrence,
        scaled_concurrence=scaled,
    )
