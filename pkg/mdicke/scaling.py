"""Finite-size scaling: peak location, data collapse and exponent fits."""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.interpolate import PchipInterpolator
from scipy.optimize import curve_fit, minimize_scalar
from scipy.stats import linregress

from .errors import CollapseError, FitError, PeakAtBoundaryError

COLLAPSE_GRID_POINTS = 200


class SizeCurve(BaseModel):
    """One finite-size curve, sorted in lambda."""

    model_config = ConfigDict(frozen=True)

    lambdas: List[float] = Field(..., min_length=5, description="Strictly increasing lambda grid")
    values: List[float] = Field(..., description="Observable at each lambda")

    @model_validator(mode="after")
    def _check_grid(self) -> "SizeCurve":
        if len(self.values) != len(self.lambdas):
            raise ValueError("lambdas and values must have the same length")
        if np.any(np.diff(self.lambdas) <= 0):
            raise ValueError("lambda grid must be strictly increasing")
        return self


class ScalingDataset(BaseModel):
    """Curves of one observable for several system sizes."""

    model_config = ConfigDict(frozen=True)

    entries: Dict[int, SizeCurve] = Field(..., description="Curve per atom count N")
    observable: str = Field(default="fs_avg", description="Observable tag")

    @field_validator("entries")
    @classmethod
    def _enough_sizes(cls, value: Dict[int, SizeCurve]) -> Dict[int, SizeCurve]:
        if len(value) < 3:
            raise ValueError("a scaling dataset needs at least three sizes")
        return value

    @classmethod
    def from_arrays(cls, curves: Mapping[int, Tuple[Sequence[float], Sequence[float]]],
                    observable: str = "fs_avg") -> "ScalingDataset":
        entries = {int(n): SizeCurve(lambdas=list(map(float, x)), values=list(map(float, y)))
                   for n, (x, y) in curves.items()}
        return cls(entries=entries, observable=observable)

    @property
    def sizes(self) -> List[int]:
        return sorted(self.entries)


class ExponentFit(BaseModel):
    """Power-law exponent from a log-log fit plus the local-slope extrapolation.

    ``local_slopes`` holds one (1/N, slope) pair per consecutive pair of sizes
    (N_i, N_{i+1}); its 1/N is the geometric mean 1/sqrt(N_i N_{i+1}), where the
    slope between two log-log points is centred.
    """

    model_config = ConfigDict(frozen=True)

    exponent: float = Field(..., description="Least-squares log-log slope")
    stderr: float = Field(..., ge=0, description="Standard error of the slope")
    amplitude: float = Field(default=0.0, description="Log-log intercept")
    local_slopes: List[Tuple[float, float]] = Field(
        default_factory=list, description="(1/sqrt(N_i N_{i+1}), slope) of consecutive sizes")
    extrapolated_intercept: float = Field(..., description="Local slope extrapolated to 1/N -> 0")

    @field_validator("local_slopes")
    @classmethod
    def _descending(cls, value: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        if any(a[0] <= b[0] for a, b in zip(value, value[1:])):
            raise ValueError("local slopes must be ordered by 1/N descending")
        return value


def locate_fs_peak(lambdas: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """Maximum of a sampled curve, refined by the parabola through the top three points."""
    x = np.asarray(lambdas, dtype=float)
    y = np.asarray(values, dtype=float)
    i = int(np.argmax(y))
    if i == 0 or i == x.size - 1:
        raise PeakAtBoundaryError(
            f"maximum at the grid edge lambda={x[i]}; widen the lambda window"
        )

    d0, d2 = x[i - 1] - x[i], x[i + 1] - x[i]
    s0, s2 = (y[i - 1] - y[i]) / d0, (y[i + 1] - y[i]) / d2
    curvature = (s2 - s0) / (d2 - d0)
    if curvature >= 0.0:
        return float(x[i]), float(y[i])
    slope = s0 - curvature * d0
    shift = -slope / (2.0 * curvature)
    return float(x[i] + shift), float(y[i] - slope * slope / (4.0 * curvature))


def _peaks(dataset: ScalingDataset) -> Dict[int, Tuple[float, float]]:
    return {n: locate_fs_peak(c.lambdas, c.values) for n, c in dataset.entries.items()}


def rescaled_curves(dataset: ScalingDataset, nu: float,
                    peaks: Optional[Mapping[int, Tuple[float, float]]] = None
                    ) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    """(N^nu (lambda - lambda_max), (chi_max - chi) / chi) for each size."""
    peaks = peaks or _peaks(dataset)
    out = {}
    for n in dataset.sizes:
        curve = dataset.entries[n]
        lam_max, chi_max = peaks[n]
        chi = np.asarray(curve.values)
        x = n ** nu * (np.asarray(curve.lambdas) - lam_max)
        out[n] = (x, (chi_max - chi) / chi)
    return out


def collapse_on_grid(dataset: ScalingDataset, nu: float,
                     peaks: Optional[Mapping[int, Tuple[float, float]]] = None,
                     points: int = COLLAPSE_GRID_POINTS) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    """Rescaled curves interpolated onto a common grid spanning their overlap."""
    curves = rescaled_curves(dataset, nu, peaks)
    lo = max(x[0] for x, _ in curves.values())
    hi = min(x[-1] for x, _ in curves.values())
    if not lo < hi:
        raise CollapseError(f"rescaled curves do not overlap at nu={nu}")
    grid = np.linspace(lo, hi, points)
    return grid, {n: PchipInterpolator(x, y)(grid) for n, (x, y) in curves.items()}


def collapse_quality(dataset: ScalingDataset, nu: float,
                     peaks: Optional[Mapping[int, Tuple[float, float]]] = None) -> float:
    """RMS spread between rescaled curves over their RMS value; 0 is a perfect collapse."""
    _, table = collapse_on_grid(dataset, nu, peaks)
    stacked = np.vstack(list(table.values()))
    spread = np.sqrt(np.mean(np.var(stacked, axis=0)))
    signal = np.sqrt(np.mean(stacked ** 2))
    if signal == 0.0:
        return float(spread)
    return float(spread / signal)


def optimize_collapse_exponent(dataset: ScalingDataset, bounds: Tuple[float, float] = (0.3, 1.2),
                               peaks: Optional[Mapping[int, Tuple[float, float]]] = None
                               ) -> Tuple[float, float]:
    """nu minimizing collapse_quality on ``bounds``; returns (nu, quality)."""
    peaks = peaks or _peaks(dataset)
    result = minimize_scalar(lambda nu: collapse_quality(dataset, nu, peaks),
                             bounds=bounds, method="bounded", options={"xatol": 1e-6})
    return float(result.x), float(result.fun)


def _sorted_points(points: Iterable[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    pairs = sorted((float(n), float(v)) for n, v in points)
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def loglog_slope_fit(points: Iterable[Tuple[float, float]]) -> ExponentFit:
    """Exponent of value ~ N^p from (N, value) pairs.

    Besides the plain least-squares slope, slopes of consecutive pairs are
    placed at 1/sqrt(N_i N_{i+1}) and extrapolated linearly to 1/N = 0.
    """
    sizes, values = _sorted_points(points)
    if sizes.size < 4:
        raise FitError(f"need at least four sizes, got {sizes.size}")
    if np.any(values <= 0) or np.any(sizes <= 0):
        raise FitError("log-log fit needs positive sizes and values")
    if np.any(np.diff(sizes) <= 0):
        raise FitError("sizes must be distinct")

    lx, ly = np.log(sizes), np.log(values)
    fit = linregress(lx, ly)
    local = np.diff(ly) / np.diff(lx)
    inverse = 1.0 / np.sqrt(sizes[:-1] * sizes[1:])
    _, intercept = np.polyfit(inverse, local, 1)
    return ExponentFit(
        exponent=float(fit.slope),
        stderr=float(fit.stderr),
        amplitude=float(fit.intercept),
        local_slopes=[(float(u), float(s)) for u, s in zip(inverse, local)],
        extrapolated_intercept=float(intercept),
    )


def _approach(n, c_inf, amplitude, theta):
    return c_inf - amplitude * n ** (-theta)


def extrapolate_c_infinity(points: Iterable[Tuple[float, float]],
                           theta_guess: float = 1.0 / 3.0) -> Tuple[float, ExponentFit]:
    """Fit C_N = C_inf - a N^-theta and return C_inf with the fit of |C_inf - C_N| vs N."""
    sizes, values = _sorted_points(points)
    if sizes.size < 4:
        raise FitError(f"need at least four sizes, got {sizes.size}")
    steps = np.diff(values)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise FitError("C_N must be strictly monotonic in N")

    # Start from the linear fit at fixed theta.
    basis = sizes ** (-theta_guess)
    slope, offset = np.polyfit(basis, values, 1)
    try:
        (c_inf, amplitude, theta), _ = curve_fit(
            _approach, sizes, values, p0=[offset, -slope, theta_guess],
            xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=20000,
        )
    except (RuntimeError, ValueError) as e:
        raise FitError(f"C_inf extrapolation failed: {e}") from e

    gaps = np.abs(c_inf - values)
    if np.any(gaps == 0.0):
        raise FitError("C_inf coincides with a finite-size value")
    return float(c_inf), loglog_slope_fit(zip(sizes, gaps))
