"""Lanczos iteration for the lowest eigenpair of a real symmetric operator."""

from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .config import SolverConfig
from .errors import LanczosConvergenceError
from .model import CoefficientTable

Operator = Callable[[np.ndarray], np.ndarray]

# Below this norm the Krylov space is invariant and T holds exact eigenvalues.
_BREAKDOWN = 1e-13


class LanczosResult:
    """Lowest Ritz pair together with its convergence record."""

    def __init__(self, energy: float, vector: CoefficientTable, residual: float,
                 iterations: int):
        self.energy = energy
        self.vector = vector
        self.residual = residual
        self.iterations = iterations

    def __iter__(self):
        # Allows ``energy, vector = lanczos_lowest(...)``.
        return iter((self.energy, self.vector))


def _lowest_ritz(alphas: np.ndarray, betas: np.ndarray) -> Tuple[float, np.ndarray]:
    if alphas.size == 1:
        return float(alphas[0]), np.ones(1)
    values, vectors = eigh_tridiagonal(alphas, betas, select="i", select_range=(0, 0))
    return float(values[0]), vectors[:, 0]


def _threshold(theta: float, config: SolverConfig) -> float:
    return max(config.lanczos_tol * abs(theta), config.residual_floor)


def lanczos_lowest(action: Operator, dim: int, config: Optional[SolverConfig] = None,
                   start: Optional[np.ndarray] = None) -> LanczosResult:
    """Algebraically smallest eigenpair by Lanczos with full reorthogonalization.

    ``action`` maps a flat vector of length ``dim`` to the operator applied to
    it. The start vector is ``start`` when given, otherwise a pseudo-random
    vector drawn from ``config.seed``. Every new Lanczos vector is
    orthogonalized twice against all stored vectors, so no spurious copies of
    converged eigenvalues appear.

    Raises LanczosConvergenceError when ``config.max_lanczos_iters`` steps do
    not bring the residual below ``config.lanczos_tol * |E|``, floored at
    ``config.residual_floor`` for energies near zero.
    """
    config = config or SolverConfig()
    if dim < 1:
        raise ValueError("dim must be >= 1")

    sector = getattr(action, "sector", None)
    shape = sector.shape if sector is not None else (1, dim)

    rng = np.random.default_rng(config.seed)
    q = rng.standard_normal(dim) if start is None else np.array(start, dtype=float).ravel()
    if q.size != dim:
        raise ValueError(f"start vector has length {q.size}, expected {dim}")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        q = rng.standard_normal(dim)
        norm = np.linalg.norm(q)
    q = q / norm

    limit = min(config.max_lanczos_iters, dim)
    capacity = min(limit, 64) + 1
    basis = np.empty((capacity, dim))
    basis[0] = q
    alphas = []
    betas = []
    best_residual = np.inf
    theta, coeffs = 0.0, np.ones(1)
    converged = False
    steps = 0

    for k in range(limit):
        w = action(basis[k])
        alpha = float(basis[k] @ w)
        alphas.append(alpha)
        w = w - alpha * basis[k]
        if k > 0:
            w -= betas[-1] * basis[k - 1]
        for _ in range(2):
            w -= basis[:k + 1].T @ (basis[:k + 1] @ w)
        beta = float(np.linalg.norm(w))
        steps = k + 1

        last = steps == limit
        if beta < _BREAKDOWN or last or steps % config.check_every == 0:
            theta, coeffs = _lowest_ritz(np.array(alphas), np.array(betas))
            estimate = abs(beta * coeffs[-1])
            best_residual = min(best_residual, estimate)
            if beta < _BREAKDOWN or estimate <= _threshold(theta, config):
                converged = True
                break
            if last:
                break

        betas.append(beta)
        if steps >= basis.shape[0]:
            grown = np.empty((min(2 * basis.shape[0], limit + 1), dim))
            grown[:basis.shape[0]] = basis
            basis = grown
        basis[steps] = w / beta

    vector = basis[:steps].T @ coeffs
    vector /= np.linalg.norm(vector)
    residual = float(np.linalg.norm(action(vector) - theta * vector))
    best_residual = min(best_residual, residual)

    if not converged and residual > _threshold(theta, config):
        raise LanczosConvergenceError(
            f"Lanczos did not converge in {steps} iterations "
            f"(best residual {best_residual:.3e})",
            best_residual=best_residual,
            iterations=steps,
            energy=theta,
        )

    return LanczosResult(theta, CoefficientTable(c=vector.reshape(shape)), residual, steps)
