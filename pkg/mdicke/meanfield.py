"""Thermodynamic-limit (mean-field) solution of the modified Dicke model."""

from math import sqrt
from typing import Tuple

from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq

from .model import ModelParams

# Open bracket end on beta; the sqrt(1 - beta^2) derivative blows up at 1.
_BETA_MAX = 1.0 - 1e-12
_ALPHA_ZERO = 1e-10


class MeanFieldSolution(BaseModel):
    """Stationary point (alpha, beta) with the lowest scaled energy."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., description="Scaled cavity displacement")
    beta: float = Field(..., ge=-1, le=1, description="Scaled atomic displacement")
    energy_per_atom: float
    phase: str = Field(..., description="normal or superradiant")

    @property
    def photons_per_atom(self) -> float:
        return self.alpha ** 2


def scaled_energy(alpha: float, beta: float, params: ModelParams) -> float:
    """E_0(alpha, beta)/N = w a^2 - 4 l a b sqrt(1-b^2) + D(b^2 - 1/2) - 2W(b^2 - 1/2)^2 + W/2."""
    if abs(beta) > 1.0:
        raise ValueError(f"|beta| must not exceed 1, got {beta}")
    w, d, lam, cap = params.omega, params.delta, params.lam, params.capital_omega
    shifted = beta * beta - 0.5
    return (w * alpha * alpha
            - 4.0 * lam * alpha * beta * sqrt(1.0 - beta * beta)
            + d * shifted
            - 2.0 * cap * shifted * shifted
            + 0.5 * cap)


def equilibrium_residuals(alpha: float, beta: float, params: ModelParams) -> Tuple[float, float]:
    """Both equilibrium equations evaluated at (alpha, beta)."""
    w, d, lam, cap = params.omega, params.delta, params.lam, params.capital_omega
    root = sqrt(1.0 - beta * beta)
    first = w * alpha - 2.0 * lam * beta * root
    second = (2.0 * alpha * lam * root
              - 2.0 * alpha * lam * beta * beta / root
              - beta * d
              + 4.0 * cap * beta * (beta * beta - 0.5))
    return first, second


def _alpha_of(beta: float, params: ModelParams) -> float:
    return 2.0 * params.lam * beta * sqrt(1.0 - beta * beta) / params.omega


def _reduced_residual(beta: float, params: ModelParams) -> float:
    # Second equation with alpha eliminated, divided by the trivial factor beta.
    w, d, lam, cap = params.omega, params.delta, params.lam, params.capital_omega
    coupling = 4.0 * lam * lam / w
    return coupling * (1.0 - 2.0 * beta * beta) - d + 4.0 * cap * beta * beta - 2.0 * cap


def minimize_meanfield(params: ModelParams) -> MeanFieldSolution:
    """Global minimizer of the scaled energy among the stationary points.

    Candidates are the trivial point (0, 0) and the root in beta of the
    reduced equilibrium equation on [0, 1), bracketed and refined with Brent's
    method. Only the beta >= 0 representative of the (alpha, beta) -> (-alpha, -beta)
    pair is reported.
    """
    candidates = [(0.0, 0.0)]
    low, high = _reduced_residual(0.0, params), _reduced_residual(_BETA_MAX, params)
    if low * high < 0.0:
        beta = brentq(_reduced_residual, 0.0, _BETA_MAX, args=(params,), xtol=1e-15, rtol=4e-16)
        candidates.append((_alpha_of(beta, params), beta))

    energies = [scaled_energy(a, b, params) for a, b in candidates]
    index = min(range(len(candidates)), key=lambda i: energies[i])
    alpha, beta = candidates[index]
    phase = "superradiant" if abs(alpha) > _ALPHA_ZERO else "normal"
    return MeanFieldSolution(alpha=alpha, beta=beta, energy_per_atom=energies[index], phase=phase)


def critical_coupling(params: ModelParams) -> float:
    """lambda_c = sqrt(w (D + 2W)) / 2."""
    return sqrt(params.omega * (params.delta + 2.0 * params.capital_omega)) / 2.0


def meanfield_photons_per_atom(params: ModelParams) -> float:
    """Order parameter <a+a>/N in the thermodynamic limit (alpha^2)."""
    return minimize_meanfield(params).photons_per_atom
