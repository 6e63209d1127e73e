"""Exception hierarchy for the modified Dicke toolkit."""

from typing import Optional


class MdickeError(Exception):
    """Base class for all toolkit errors."""


class SectorError(MdickeError):
    """Invalid total angular momentum sector for the given atom count."""


class KernelOverflowError(MdickeError):
    """Displaced overlap kernel produced non-finite entries."""


class LanczosConvergenceError(MdickeError):
    """Lanczos iteration hit its iteration cap without converging."""

    def __init__(self, message: str, best_residual: float, iterations: int,
                 energy: Optional[float] = None):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations
        self.energy = energy


class NotConvergedError(MdickeError):
    """An observable was requested from an unconverged ground state."""


class ParameterMismatchError(MdickeError):
    """Two ground states do not share (omega, delta, Omega, N)."""


class SectorChangeError(MdickeError):
    """The ground-state sector changes between two nearby couplings."""


class GridError(MdickeError):
    """A sampled curve is too short or not uniformly spaced."""


class InvalidDensityMatrixError(MdickeError):
    """Density matrix violates positivity beyond tolerance."""


class PeakAtBoundaryError(MdickeError):
    """Curve maximum sits at a grid endpoint."""


class CollapseError(MdickeError):
    """Rescaled curves share no common window."""


class FitError(MdickeError):
    """Input data cannot be fitted."""


class ConfigError(MdickeError):
    """Run configuration could not be resolved."""
