import numpy as np
import pytest
from pydantic import ValidationError

from mdicke.errors import CollapseError, FitError, PeakAtBoundaryError
from mdicke.scaling import (
    ExponentFit,
    ScalingDataset,
    collapse_quality,
    extrapolate_c_infinity,
    locate_fs_peak,
    loglog_slope_fit,
    optimize_collapse_exponent,
    rescaled_curves,
)

SIZES = (32, 64, 128, 256)
PEAK = 0.5


def synthetic_dataset(nu=2.0 / 3.0):
    """Curves with (chi_max - chi)/chi = 3 + N^nu (lambda - PEAK) exactly, chi_max = 1."""
    lambdas = np.linspace(0.45, 0.55, 21)
    curves = {n: (lambdas, 1.0 / (4.0 + n ** nu * (lambdas - PEAK))) for n in SIZES}
    return ScalingDataset.from_arrays(curves)


def fixed_peaks():
    return {n: (PEAK, 1.0) for n in SIZES}


class TestLocatePeak:
    """Sub-grid location of a curve maximum."""

    def test_parabola_is_exact(self):
        """A sampled parabola is refined to its true vertex."""
        x = np.linspace(0.0, 1.0, 11)
        lam, value = locate_fs_peak(x, 2.0 - (x - 0.43) ** 2)
        assert lam == pytest.approx(0.43, abs=1e-12)
        assert value == pytest.approx(2.0, abs=1e-12)

    def test_symmetric_tent(self):
        """A symmetric tent peaks exactly at its apex."""
        x = np.linspace(0.0, 1.0, 11)
        lam, value = locate_fs_peak(x, 1.0 - np.abs(x - 0.5))
        assert lam == pytest.approx(0.5, abs=1e-12)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_boundary_peak_raises(self):
        """A maximum at the grid edge is reported."""
        x = np.linspace(0.0, 1.0, 11)
        with pytest.raises(PeakAtBoundaryError):
            locate_fs_peak(x, x)


class TestCollapse:
    """Rescaling and collapse quality."""

    def test_rescaled_curves(self):
        """Rescaled ordinates follow (chi_max - chi) / chi."""
        curves = rescaled_curves(synthetic_dataset(), 2.0 / 3.0, fixed_peaks())
        for x, y in curves.values():
            assert np.allclose(y, 3.0 + x, atol=1e-12)

    def test_quality_separates_exponents(self):
        """The true exponent collapses perfectly, a wrong one does not."""
        dataset = synthetic_dataset()
        good = collapse_quality(dataset, 2.0 / 3.0, fixed_peaks())
        bad = collapse_quality(dataset, 1.0 / 3.0, fixed_peaks())
        assert good < 1e-10
        assert bad > 0.02

    def test_optimizer_recovers_exponent(self):
        """Minimizing the quality finds nu = 2/3."""
        nu, quality = optimize_collapse_exponent(synthetic_dataset(), peaks=fixed_peaks())
        assert nu == pytest.approx(2.0 / 3.0, abs=1e-3)
        assert quality < 1e-3

    @pytest.mark.parametrize("nu", [1.0 / 3.0, 1.0])
    def test_quality_invariant_under_axis_scaling(self, nu):
        """Stretching the lambda axis by a constant leaves the collapse quality unchanged."""
        dataset = synthetic_dataset()
        stretched = ScalingDataset.from_arrays(
            {n: (2.5 * np.asarray(c.lambdas), c.values) for n, c in dataset.entries.items()})
        peaks = {n: (2.5 * PEAK, 1.0) for n in SIZES}
        assert collapse_quality(stretched, nu, peaks) == pytest.approx(
            collapse_quality(dataset, nu, fixed_peaks()), rel=1e-9)

    def test_disjoint_windows_raise(self):
        """Curves that share no rescaled window cannot be collapsed."""
        curves = {n: (np.linspace(0.1 * k, 0.1 * k + 0.05, 6), np.ones(6))
                  for k, n in enumerate(SIZES)}
        dataset = ScalingDataset.from_arrays(curves)
        peaks = {n: (0.0, 2.0) for n in SIZES}
        with pytest.raises(CollapseError):
            collapse_quality(dataset, 1.0, peaks)

    def test_dataset_validation(self):
        """At least three sizes of at least five points each."""
        x = np.linspace(0.0, 1.0, 6)
        with pytest.raises(ValidationError):
            ScalingDataset.from_arrays({16: (x, x), 32: (x, x)})
        with pytest.raises(ValidationError):
            ScalingDataset.from_arrays({16: (x[:4], x[:4]), 32: (x, x), 64: (x, x)})
        with pytest.raises(ValidationError):
            ScalingDataset.from_arrays({16: (x[::-1], x), 32: (x, x), 64: (x, x)})


class TestLogLogFit:
    """Power-law exponents with local-slope extrapolation."""

    def test_exact_power_law(self):
        """2 N^-0.66 is fitted exactly."""
        sizes = [16, 32, 64, 128, 256, 512]
        fit = loglog_slope_fit((n, 2.0 * n ** -0.66) for n in sizes)
        assert isinstance(fit, ExponentFit)
        assert fit.exponent == pytest.approx(-0.66, abs=1e-12)
        assert fit.stderr == pytest.approx(0.0, abs=1e-10)
        assert fit.amplitude == pytest.approx(np.log(2.0), abs=1e-12)
        assert fit.extrapolated_intercept == pytest.approx(-0.66, abs=1e-10)
        assert [s for _, s in fit.local_slopes] == pytest.approx([-0.66] * 5, abs=1e-12)

    def test_scale_equivariance(self):
        """Multiplying every value by a constant only shifts the amplitude."""
        sizes = [16, 32, 64, 128, 256]
        points = [(n, n ** -0.5 * (1.0 + 2.0 / n)) for n in sizes]
        fit = loglog_slope_fit(points)
        scaled = loglog_slope_fit((n, 7.3 * v) for n, v in points)
        assert scaled.exponent == pytest.approx(fit.exponent, abs=1e-12)
        assert scaled.extrapolated_intercept == pytest.approx(fit.extrapolated_intercept, abs=1e-10)
        assert scaled.amplitude == pytest.approx(fit.amplitude + np.log(7.3), abs=1e-12)

    def test_extrapolation_removes_leading_correction(self):
        """For 2 N^(-1/3)(1 + 3/N) the local-slope intercept beats the plain slope."""
        sizes = [16, 32, 64, 128, 256, 512]
        fit = loglog_slope_fit((n, 2.0 * n ** (-1.0 / 3.0) * (1.0 + 3.0 / n)) for n in sizes)
        assert abs(fit.extrapolated_intercept + 1.0 / 3.0) < abs(fit.exponent + 1.0 / 3.0)
        assert fit.extrapolated_intercept == pytest.approx(-1.0 / 3.0, abs=0.02)

    def test_local_slopes_ordered(self):
        """Local slopes sit at 1/sqrt(N_i N_{i+1}), listed with 1/N descending."""
        fit = loglog_slope_fit([(64, 0.2), (16, 0.5), (32, 0.3), (128, 0.15)])
        inverse = [u for u, _ in fit.local_slopes]
        assert inverse == sorted(inverse, reverse=True)
        assert inverse == pytest.approx([1.0 / np.sqrt(16 * 32), 1.0 / np.sqrt(32 * 64), 1.0 / np.sqrt(64 * 128)])

    def test_too_few_sizes(self):
        """Three sizes are not enough."""
        with pytest.raises(FitError):
            loglog_slope_fit([(16, 1.0), (32, 0.5), (64, 0.25)])

    def test_nonpositive_values(self):
        """Logarithms need positive data."""
        with pytest.raises(FitError):
            loglog_slope_fit([(16, 1.0), (32, 0.0), (64, 0.25), (128, 0.1)])


class TestExtrapolateCInfinity:
    """Thermodynamic-limit concurrence from finite sizes."""

    def test_exact_third_power(self):
        """0.3 - N^(-1/3) gives C_inf = 0.3 and exponent -1/3."""
        sizes = [16, 32, 64, 128, 256, 512]
        c_inf, fit = extrapolate_c_infinity((n, 0.3 - n ** (-1.0 / 3.0)) for n in sizes)
        assert c_inf == pytest.approx(0.3, abs=1e-9)
        assert fit.exponent == pytest.approx(-1.0 / 3.0, abs=1e-6)

    def test_other_exponent(self):
        """The approach exponent is fitted, not fixed."""
        sizes = [16, 32, 64, 128, 256, 512]
        c_inf, fit = extrapolate_c_infinity((n, 0.25 - 0.5 * n ** -0.4) for n in sizes)
        assert c_inf == pytest.approx(0.25, abs=1e-6)
        assert fit.exponent == pytest.approx(-0.4, abs=1e-3)

    def test_non_monotonic_rejected(self):
        """A non-monotonic sequence has no power-law approach."""
        with pytest.raises(FitError):
            extrapolate_c_infinity([(16, 0.1), (32, 0.2), (64, 0.15), (128, 0.25)])
