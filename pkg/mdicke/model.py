"""Model parameters, sector bases and the displaced-basis Hamiltonian.

The Hamiltonian is handled in the frame rotated by pi/2 about the y axis,

    H' = w a+a - (D/2)(S+ + S-) + (2 l / sqrt(N)) (a+ + a) S_z + (2 W / N)(S^2 - S_x^2),

inside one total angular momentum sector j. Each magnetic index n carries its
own bosonic basis built on ``A_n = a + g_n``, which removes the linear boson
term exactly and leaves only finite-range couplings between n and n +/- 1, 2.
"""

from math import isclose, sqrt
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .errors import SectorError
from .kernels import displaced_overlap_kernel, displacement_matrix


class ModelParams(BaseModel):
    """Physical couplings defining one modified Dicke Hamiltonian."""

    model_config = ConfigDict(frozen=True)

    omega: float = Field(default=1.0, gt=0, description="Cavity frequency")
    delta: float = Field(default=1.0, ge=0, description="Qubit splitting")
    lam: float = Field(default=0.0, ge=0, description="Atom-cavity coupling lambda")
    capital_omega: float = Field(default=0.0, ge=0, description="Interatomic coupling Omega")
    n_atoms: int = Field(default=2, ge=1, description="Number of atoms N")

    @property
    def j_max(self) -> float:
        return self.n_atoms / 2.0

    @property
    def omega_prime(self) -> float:
        """Scaled interatomic coupling 2 Omega / N."""
        return 2.0 * self.capital_omega / self.n_atoms

    @property
    def displacement_step(self) -> float:
        """G = 2 lambda / (omega sqrt(N)), the shift between neighbouring bases."""
        return 2.0 * self.lam / (self.omega * sqrt(self.n_atoms))

    def admissible_j(self) -> Tuple[float, ...]:
        """All j = N/2 - r with r = 0 .. floor(N/2), largest first."""
        return tuple(self.j_max - r for r in range(self.n_atoms // 2 + 1))

    def with_lambda(self, lam: float) -> "ModelParams":
        return ModelParams(**{**self.model_dump(), "lam": float(lam)})


class SectorBasis(BaseModel):
    """Dicke (2j+1) times displaced-Fock (N_tr+1) basis of one j sector."""

    model_config = ConfigDict(frozen=True)

    j: float = Field(..., ge=0, description="Total angular momentum")
    n_tr: int = Field(..., ge=0, description="Boson truncation N_tr")

    @field_validator("j")
    @classmethod
    def _half_integer(cls, value: float) -> float:
        if not float(2 * value).is_integer():
            raise ValueError(f"j must be integer or half-integer, got {value}")
        return float(value)

    @property
    def n_magnetic(self) -> int:
        return int(round(2 * self.j)) + 1

    @property
    def n_boson(self) -> int:
        return self.n_tr + 1

    @property
    def dim(self) -> int:
        return self.n_magnetic * self.n_boson

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_magnetic, self.n_boson)

    def magnetic_indices(self) -> np.ndarray:
        """n = -j, -j+1, ..., j."""
        return np.arange(self.n_magnetic, dtype=float) - self.j


class CoefficientTable(BaseModel):
    """Coefficients c_{n,k} of a state in the displaced-Fock basis."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    c: np.ndarray = Field(..., description="Real matrix indexed (n + j, k)")

    @property
    def norm(self) -> float:
        # Displaced bases are orthonormal within each n, so this is the state norm.
        return float(np.linalg.norm(self.c))

    def normalized(self) -> "CoefficientTable":
        return CoefficientTable(c=self.c / self.norm)

    def padded(self, n_tr: int) -> np.ndarray:
        """Copy of c zero-padded (or truncated) to n_tr + 1 boson columns."""
        rows, cols = self.c.shape
        out = np.zeros((rows, n_tr + 1))
        keep = min(cols, n_tr + 1)
        out[:, :keep] = self.c[:, :keep]
        return out


def validate_sector(params: ModelParams, j: float) -> None:
    """Raise SectorError unless 0 <= j <= N/2 with N/2 - j integral."""
    r = params.j_max - j
    if j < 0 or r < -1e-12:
        raise SectorError(f"j={j} outside [0, N/2={params.j_max}]")
    if not isclose(r, round(r), abs_tol=1e-9):
        raise SectorError(f"N/2 - j must be integral, got j={j} for N={params.n_atoms}")


def displacement(params: ModelParams, m: float) -> float:
    """Boson displacement g_m = 2 lambda m / (omega sqrt(N)) for magnetic index m."""
    if abs(m) > params.j_max + 1e-12:
        raise SectorError(f"|m|={abs(m)} exceeds N/2={params.j_max}")
    return 2.0 * params.lam * m / (params.omega * sqrt(params.n_atoms))


def ladder_factors(j: float, n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (j_n^-, j_n^+) with j_m^{+/-} = sqrt(j(j+1) - m(m +/- 1)) / 2."""
    jj = j * (j + 1.0)
    minus = 0.5 * np.sqrt(np.maximum(jj - n * (n - 1.0), 0.0))
    plus = 0.5 * np.sqrt(np.maximum(jj - n * (n + 1.0), 0.0))
    return minus, plus


def atoms_only_energy(params: ModelParams, j: float) -> float:
    """Lowest eigenvalue of D S_z + (2W/N)(S^2 - S_z^2) inside sector j (at m = -j)."""
    return (-params.delta + params.omega_prime) * j


def atoms_only_ground(params: ModelParams) -> Tuple[float, float]:
    """Ground sector and energy of the atoms-only Hamiltonian (lambda ignored).

    E_0 = (-D + 2W/N) j is linear in j, so the minimum sits at j = N/2 when the
    slope is negative and at the smallest admissible j when it is positive. On
    the boundary 2W/N = D every j is degenerate and j = N/2 is returned.
    """
    slope = -params.delta + params.omega_prime
    if slope < 0 or isclose(params.omega_prime, params.delta, rel_tol=1e-12, abs_tol=1e-15):
        j = params.j_max
    else:
        j = params.admissible_j()[-1]
    return j, atoms_only_energy(params, j)


class HamiltonianAction:
    """Matrix-free action of H' on coefficient tables of one sector.

    Row (n, l) of the eigenvalue problem reads

        [w(l - g_n^2) + (2W/N)(j(j+1) - (j_n^-)^2 - (j_n^+)^2)] c_{n,l}
        - D j_n^-  sum_k <l|D(G)|k>   c_{n-1,k}
        - D j_n^+  sum_k <l|D(-G)|k>  c_{n+1,k}
        - (2W/N) j_n^- j_{n-1}^- sum_k <l|D(2G)|k>  c_{n-2,k}
        - (2W/N) j_n^+ j_{n+1}^+ sum_k <l|D(-2G)|k> c_{n+2,k}

    where <l|D(G)|k> = (-1)^k D_{l,k}(G) and <l|D(-G)|k> = (-1)^l D_{l,k}(G).
    """

    def __init__(self, params: ModelParams, sector: SectorBasis):
        validate_sector(params, sector.j)
        self.params = params
        self.sector = sector

        size = sector.n_boson
        G = params.displacement_step
        self.kernel_g = displaced_overlap_kernel(G, size)
        self.kernel_2g = displaced_overlap_kernel(2.0 * G, size)
        # Signed blocks <l|D(G)|k> and <l|D(2G)|k>; the n+1, n+2 blocks are transposes.
        self._shift_1 = displacement_matrix(G, size)
        self._shift_2 = displacement_matrix(2.0 * G, size)

        j = sector.j
        n = sector.magnetic_indices()
        g = 2.0 * params.lam * n / (params.omega * sqrt(params.n_atoms))
        jm, jp = ladder_factors(j, n)
        scale = params.omega_prime

        self.g = g
        self.spin_diagonal = scale * (j * (j + 1.0) - jm ** 2 - jp ** 2)
        boson = params.omega * np.arange(size, dtype=float)
        self.diagonal = boson[np.newaxis, :] - params.omega * g[:, np.newaxis] ** 2 \
            + self.spin_diagonal[:, np.newaxis]

        self._hop_down = params.delta * jm[1:]
        self._hop_up = params.delta * jp[:-1]
        self._pair_down = scale * jm[2:] * jm[1:-1]
        self._pair_up = scale * jp[:-2] * jp[1:-1]

    @property
    def dim(self) -> int:
        return self.sector.dim

    def apply(self, c: np.ndarray) -> np.ndarray:
        """Return H' c for a table c of shape (2j+1, N_tr+1)."""
        out = self.diagonal * c
        if c.shape[0] > 1:
            out[1:] -= self._hop_down[:, np.newaxis] * (c[:-1] @ self._shift_1.T)
            out[:-1] -= self._hop_up[:, np.newaxis] * (c[1:] @ self._shift_1)
        if c.shape[0] > 2:
            out[2:] -= self._pair_down[:, np.newaxis] * (c[:-2] @ self._shift_2.T)
            out[:-2] -= self._pair_up[:, np.newaxis] * (c[2:] @ self._shift_2)
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Flat-vector version of apply, used by the eigensolver."""
        return self.apply(v.reshape(self.sector.shape)).ravel()

    __call__ = matvec

    def to_dense(self) -> np.ndarray:
        """Assemble the full symmetric matrix (small sectors only)."""
        rows, size = self.sector.shape
        dense = np.zeros((rows, size, rows, size))
        for i in range(rows):
            dense[i, :, i, :] = np.diag(self.diagonal[i])
        for i in range(1, rows):
            block = -self._hop_down[i - 1] * self._shift_1
            dense[i, :, i - 1, :] = block
            dense[i - 1, :, i, :] = block.T
        for i in range(2, rows):
            block = -self._pair_down[i - 2] * self._shift_2
            dense[i, :, i - 2, :] = block
            dense[i - 2, :, i, :] = block.T
        return dense.reshape(rows * size, rows * size)


def build_hamiltonian_action(params: ModelParams, sector: SectorBasis) -> HamiltonianAction:
    """Precompute kernels and diagonal energies for one (params, sector) pair."""
    return HamiltonianAction(params, sector)
