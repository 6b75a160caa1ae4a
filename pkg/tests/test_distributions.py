"""
Tests for the truncated-normal, scaled inverse chi-square and calibration
primitives.

Oracles are independent of the code under test: closed forms through
``scipy.stats``, adaptive quadrature for the normalizers and the slab
marginal, and Kolmogorov-Smirnov tests for the samplers.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from disjunct_bvs import distributions
from disjunct_bvs.distributions import (
    CALIBRATION_TOLERANCE,
    RegionKind,
    ScaledInvChiSqParams,
    SupportRegion,
    calibrate_sigma0,
    log_trunc_norm_const,
    sample_scaled_inv_chisq,
    sample_trunc_norm,
    scaled_inv_chisq_logpdf,
    slab_marginal_density,
    spike_boundary_density,
)
from disjunct_bvs.exceptions import (
    CalibrationInfeasibleError,
    InvalidArgumentError,
    NumericalFailureError,
)

KS_ALPHA = 1e-3


def draws(region, mean, var, count, seed=0):
    rng = np.random.default_rng(seed)
    return np.array([sample_trunc_norm(region, mean, var, rng) for _ in range(count)])


def outer_cdf(delta, mean, sd):
    """CDF of N(mean, sd^2) truncated to |x| >= delta."""
    a = (-delta - mean) / sd
    b = (delta - mean) / sd
    left, right = stats.norm.cdf(a), stats.norm.sf(b)
    total = left + right

    def cdf(x):
        x = np.asarray(x, dtype=float)
        z = (x - mean) / sd
        below = stats.norm.cdf(np.minimum(z, a))
        above = np.where(z > b, stats.norm.cdf(z) - stats.norm.cdf(b), 0.0)
        return (below + above) / total

    return cdf


# =============================================================================
# SupportRegion
# =============================================================================


class TestSupportRegion:
    """Canonical forms and membership."""

    def test_inner_zero_is_point_mass(self):
        assert SupportRegion.inner(0.0) == SupportRegion.point_mass()
        assert SupportRegion.inner(0.0).is_point_mass

    def test_outer_zero_is_full(self):
        assert SupportRegion.outer(0.0) == SupportRegion.full()
        assert SupportRegion.outer(0.0).kind == RegionKind.FULL

    def test_negative_delta_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SupportRegion.inner(-0.1)

    def test_boundaries_are_closed(self):
        assert SupportRegion.inner(0.5).contains(0.5)
        assert SupportRegion.inner(0.5).contains(-0.5)
        assert SupportRegion.outer(0.5).contains(0.5)
        assert not SupportRegion.outer(0.5).contains(0.4999)
        assert not SupportRegion.inner(0.5).contains(0.5001)

    def test_contains_all_on_empty(self):
        assert SupportRegion.outer(0.8).contains_all(np.array([]))

    def test_point_mass_contains_only_zero(self):
        pm = SupportRegion.point_mass()
        assert pm.contains(0.0)
        assert not pm.contains(1e-300)

    def test_str(self):
        assert str(SupportRegion.inner(0.5)) == "inner(0.5)"
        assert str(SupportRegion.full()) == "full"


# =============================================================================
# log_trunc_norm_const
# =============================================================================


class TestLogTruncNormConst:
    """Normalizers against closed forms and quadrature."""

    def test_full_standard(self):
        value = log_trunc_norm_const(SupportRegion.full(), 0.0, 1.0)
        assert value == pytest.approx(0.9189385, abs=1e-7)

    def test_outer_zero_equals_full(self):
        value = log_trunc_norm_const(SupportRegion.outer(0.0), 0.0, 4.0)
        assert value == pytest.approx(math.log(math.sqrt(8.0 * math.pi)), rel=1e-12)

    def test_inner_unit(self):
        expected = math.log(math.sqrt(2.0 * math.pi) * (2.0 * stats.norm.cdf(1.0) - 1.0))
        value = log_trunc_norm_const(SupportRegion.inner(1.0), 0.0, 1.0)
        assert value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize(
        "delta,mean,var",
        [(0.5, 0.0, 1.0), (0.5, 0.3, 0.04), (0.8, -1.0, 2.0), (0.05, 0.01, 0.001)],
    )
    def test_inner_matches_quadrature(self, delta, mean, var):
        value, _ = integrate.quad(
            lambda x: math.exp(-((x - mean) ** 2) / (2.0 * var)),
            -delta,
            delta,
            points=[min(max(mean, -delta), delta)],
            epsabs=0.0,
            epsrel=1e-12,
        )
        value_log = log_trunc_norm_const(SupportRegion.inner(delta), mean, var)
        assert value_log == pytest.approx(math.log(value), rel=1e-9)

    @pytest.mark.parametrize(
        "delta,mean,var", [(0.5, 0.0, 1.0), (0.8, 0.6, 0.25), (1.0, -2.0, 1.0)]
    )
    def test_outer_matches_quadrature(self, delta, mean, var):
        def f(x):
            return math.exp(-((x - mean) ** 2) / (2.0 * var))

        left, _ = integrate.quad(f, -np.inf, -delta, epsabs=0.0, epsrel=1e-12)
        right, _ = integrate.quad(f, delta, np.inf, epsabs=0.0, epsrel=1e-12)
        value = log_trunc_norm_const(SupportRegion.outer(delta), mean, var)
        assert value == pytest.approx(math.log(left + right), rel=1e-9)

    def test_outer_far_tails_stay_finite(self):
        """Standardized bounds at +-100 are where Phi underflows."""
        var = 1e-4
        value = log_trunc_norm_const(SupportRegion.outer(1.0), 0.0, var)
        expected = 0.5 * math.log(2.0 * math.pi * var) + math.log(2.0) + special.log_ndtr(-100.0)
        assert math.isfinite(value)
        assert value == pytest.approx(expected, rel=1e-10)

    def test_inner_far_from_mean_stays_finite(self):
        var = 1e-4
        value = log_trunc_norm_const(SupportRegion.inner(0.5), 50.0, var)
        expected = 0.5 * math.log(2.0 * math.pi * var) + special.log_ndtr(-4950.0)
        assert math.isfinite(value)
        assert value == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize(
        "delta,mean,var",
        [(1e-3, 2724.7, 6485.6), (1e-3, -2724.7, 6485.6), (1e-2, 3.0, 0.01), (1e-6, 0.4, 1e-4)],
    )
    def test_narrow_window_far_from_mean(self, delta, mean, var):
        """The window is a sliver of one tail; no precision may leak from the tail masses."""
        sd = math.sqrt(var)
        lo = (abs(mean) - delta) / sd
        width = 2.0 * delta / sd
        integral, _ = integrate.quad(
            lambda t: math.exp(-(lo * t + 0.5 * t * t)), 0.0, width, epsabs=0.0, epsrel=1e-14
        )
        expected = 0.5 * math.log(var) - 0.5 * lo * lo + math.log(integral)
        value = log_trunc_norm_const(SupportRegion.inner(delta), mean, var)
        assert value == pytest.approx(expected, abs=1e-11)

    def test_symmetric_in_mean(self):
        region = SupportRegion.outer(0.5)
        assert log_trunc_norm_const(region, 1.3, 0.7) == pytest.approx(
            log_trunc_norm_const(region, -1.3, 0.7), rel=1e-13
        )

    def test_point_mass_rejected(self):
        with pytest.raises(InvalidArgumentError):
            log_trunc_norm_const(SupportRegion.point_mass(), 0.0, 1.0)

    @pytest.mark.parametrize(
        "mean,var", [(0.0, 0.0), (0.0, -1.0), (math.nan, 1.0), (0.0, math.inf)]
    )
    def test_bad_moments_rejected(self, mean, var):
        with pytest.raises(InvalidArgumentError):
            log_trunc_norm_const(SupportRegion.full(), mean, var)


# =============================================================================
# sample_trunc_norm
# =============================================================================


class TestSampleTruncNorm:
    """Exact truncated-normal draws."""

    @pytest.mark.parametrize(
        "delta,mean,var",
        [
            (2.0, 0.0, 1.0),  # wide interval around the mean, normal proposals
            (0.5, 0.0, 1.0),  # narrow interval around the mean
            (0.5, 6.0, 1.0),  # interval far left of the mean
            (0.5, 0.8, 0.01),  # one-sided, exponential proposals
            (0.05, 0.3, 0.04),  # narrow one-sided window
        ],
    )
    def test_inner_ks(self, delta, mean, var):
        sd = math.sqrt(var)
        x = draws(SupportRegion.inner(delta), mean, var, 3000, seed=11)
        law = stats.truncnorm((-delta - mean) / sd, (delta - mean) / sd, loc=mean, scale=sd)
        assert stats.kstest(x, law.cdf).pvalue > KS_ALPHA

    @pytest.mark.parametrize(
        "delta,mean,var",
        [(0.5, 0.0, 1.0), (0.8, 0.5, 0.25), (0.5, -0.2, 4.0), (1.0, 2.5, 1.0)],
    )
    def test_outer_ks(self, delta, mean, var):
        x = draws(SupportRegion.outer(delta), mean, var, 3000, seed=5)
        assert stats.kstest(x, outer_cdf(delta, mean, math.sqrt(var))).pvalue > KS_ALPHA

    def test_unit_interval_variance(self):
        x = draws(SupportRegion.inner(1.0), 0.0, 1.0, 20000, seed=3)
        expected = stats.truncnorm(-1.0, 1.0).var()
        assert np.all(np.abs(x) <= 1.0)
        assert x.var() == pytest.approx(expected, abs=0.01)

    def test_full_mean(self):
        x = draws(SupportRegion.full(), 3.0, 4.0, 20000, seed=4)
        assert x.mean() == pytest.approx(3.0, abs=0.05)

    def test_wide_outer_splits_evenly(self):
        x = draws(SupportRegion.outer(0.5), 0.0, 1e6, 4000, seed=8)
        assert 0.45 < np.mean(x > 0) < 0.55

    def test_tiny_variance_hugs_boundary(self):
        x = draws(SupportRegion.outer(0.5), 0.0, 1e-4, 2000, seed=9)
        assert np.all(np.abs(x) >= 0.5)
        assert np.abs(x).max() < 0.52
        assert 0.4 < np.mean(x > 0) < 0.6

    def test_tiny_interval_is_nearly_uniform(self):
        x = draws(SupportRegion.inner(1e-3), 0.0, 100.0, 3000, seed=10)
        assert stats.kstest(x, stats.uniform(-1e-3, 2e-3).cdf).pvalue > KS_ALPHA

    @pytest.mark.parametrize("delta", [0.001, 0.5, 0.8])
    @pytest.mark.parametrize("var", [1e-4, 1.0, 1e4])
    @pytest.mark.parametrize("mean", [-3.0, 0.0, 0.7])
    def test_draws_stay_in_region(self, delta, var, mean):
        for region in (SupportRegion.inner(delta), SupportRegion.outer(delta)):
            x = draws(region, mean, var, 300, seed=12)
            assert region.contains_all(x), region

    def test_deterministic_given_seed(self):
        region = SupportRegion.outer(0.5)
        first = draws(region, 0.2, 1.0, 50, seed=1)
        assert np.array_equal(first, draws(region, 0.2, 1.0, 50, seed=1))

    def test_point_mass_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sample_trunc_norm(SupportRegion.point_mass(), 0.0, 1.0, np.random.default_rng(0))

    def test_proposal_cap_raises(self, monkeypatch):
        monkeypatch.setattr(distributions, "MAX_PROPOSALS", 3)

        class Unlucky:
            """Proposals always land outside the region."""

            def standard_normal(self):
                return -10.0

            def random(self):
                return 0.99

        with pytest.raises(NumericalFailureError) as exc:
            sample_trunc_norm(SupportRegion.inner(5.0), 0.0, 1.0, Unlucky())
        assert exc.value.exit_code == 3
        assert exc.value.details["operation"] == "sample_trunc_norm"


# =============================================================================
# Scaled inverse chi-square
# =============================================================================


class TestScaledInvChiSq:
    """Sampler and density against scipy's inverse gamma."""

    @pytest.mark.parametrize("nu,eta2", [(1.0, 1.0), (11.0, 31.0 / 11.0), (3.5, 100.0)])
    def test_logpdf_matches_invgamma(self, nu, eta2):
        law = stats.invgamma(a=nu / 2.0, scale=nu * eta2 / 2.0)
        params = ScaledInvChiSqParams(nu, eta2)
        for s2 in (0.01, 0.7, 3.0, 250.0):
            value = scaled_inv_chisq_logpdf(s2, params)
            assert value == pytest.approx(law.logpdf(s2), rel=1e-10, abs=1e-12)

    def test_direct_substitution(self):
        assert scaled_inv_chisq_logpdf(1.0, ScaledInvChiSqParams(2.0, 1.0)) == pytest.approx(-1.0)

    def test_density_integrates_to_one(self):
        params = ScaledInvChiSqParams(1.0, 1.0)
        value, _ = integrate.quad(
            lambda u: math.exp(scaled_inv_chisq_logpdf(math.exp(u), params) + u),
            -40.0,
            math.log(1e6),
            limit=200,
        )
        tail = stats.invgamma(a=0.5, scale=0.5).sf(1e6)
        assert value + tail == pytest.approx(1.0, abs=1e-6)

    def test_mode_is_maximum(self):
        params = ScaledInvChiSqParams(5.0, 2.0)
        peak = scaled_inv_chisq_logpdf(params.mode, params)
        for factor in (0.9, 0.99, 1.01, 1.1):
            assert scaled_inv_chisq_logpdf(params.mode * factor, params) < peak

    def test_sample_mean(self):
        params = ScaledInvChiSqParams(11.0, 31.0 / 11.0)
        rng = np.random.default_rng(2)
        x = np.array([sample_scaled_inv_chisq(params, rng) for _ in range(50000)])
        assert x.mean() == pytest.approx(31.0 / 9.0, rel=0.02)
        assert params.mean == pytest.approx(31.0 / 9.0)

    def test_sample_median_heavy_tail(self):
        params = ScaledInvChiSqParams(1.0, 1.0)
        rng = np.random.default_rng(3)
        x = np.array([sample_scaled_inv_chisq(params, rng) for _ in range(20000)])
        assert np.median(x) == pytest.approx(1.0 / stats.chi2(1).ppf(0.5), rel=0.05)

    def test_sample_ks(self):
        params = ScaledInvChiSqParams(4.0, 2.5)
        rng = np.random.default_rng(4)
        x = np.array([sample_scaled_inv_chisq(params, rng) for _ in range(3000)])
        law = stats.invgamma(a=2.0, scale=5.0)
        assert stats.kstest(x, law.cdf).pvalue > KS_ALPHA

    @pytest.mark.parametrize(
        "nu,eta2,quantile",
        [(4.0, 2.5, 0.3), (4.0, 29.47, 1e-3), (1.0, 100.0, 0.5), (11.0, 3.0, 1e-20)],
    )
    def test_restricted_draws(self, nu, eta2, quantile):
        """Draws below the ``quantile`` point follow the truncated law, deep tails included."""
        law = stats.invgamma(a=nu / 2.0, scale=nu * eta2 / 2.0)
        upper = float(law.ppf(quantile))
        params = ScaledInvChiSqParams(nu, eta2)
        rng = np.random.default_rng(6)
        x = np.array(
            [distributions.sample_scaled_inv_chisq_below(params, upper, rng) for _ in range(3000)]
        )
        assert np.all((x > 0.0) & (x <= upper))
        log_mass = law.logcdf(upper)
        result = stats.kstest(x, lambda v: np.exp(law.logcdf(np.minimum(v, upper)) - log_mass))
        assert result.pvalue > KS_ALPHA

    def test_restricted_deep_tail_uses_rejection(self):
        nu, eta2 = 11.0, 3.0
        upper = float(stats.invgamma(a=nu / 2.0, scale=nu * eta2 / 2.0).ppf(1e-20))
        tail = special.gammaincc(nu / 2.0, nu * eta2 / (2.0 * upper))
        assert tail < distributions.GAMMA_TAIL_SWITCH

    def test_restricted_without_bound_is_unrestricted(self):
        params = ScaledInvChiSqParams(4.0, 2.5)
        first = distributions.sample_scaled_inv_chisq_below(
            params, math.inf, np.random.default_rng(1)
        )
        assert first == sample_scaled_inv_chisq(params, np.random.default_rng(1))

    @pytest.mark.parametrize("upper", [0.0, -1.0, math.nan])
    def test_restricted_rejects_bad_bound(self, upper):
        with pytest.raises(InvalidArgumentError):
            distributions.sample_scaled_inv_chisq_below(
                ScaledInvChiSqParams(1.0, 1.0), upper, np.random.default_rng(0)
            )

    def test_mean_infinite_for_small_nu(self):
        assert ScaledInvChiSqParams(2.0, 1.0).mean == math.inf

    @pytest.mark.parametrize("nu,eta2", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
    def test_invalid_parameters(self, nu, eta2):
        with pytest.raises(InvalidArgumentError):
            ScaledInvChiSqParams(nu, eta2)

    def test_logpdf_rejects_non_positive(self):
        with pytest.raises(InvalidArgumentError):
            scaled_inv_chisq_logpdf(0.0, ScaledInvChiSqParams(1.0, 1.0))


# =============================================================================
# Slab marginal and calibration
# =============================================================================


def slab_marginal_oracle(beta, nu1, eta1_2, delta):
    """Quadrature over log sigma^2 with scipy densities only."""
    law = stats.invgamma(a=nu1 / 2.0, scale=nu1 * eta1_2 / 2.0)

    def integrand(u):
        s2 = math.exp(u)
        sd = math.sqrt(s2)
        log_mass = math.log(2.0) + stats.norm.logsf(delta / sd) if delta > 0 else 0.0
        return math.exp(stats.norm.logpdf(beta, scale=sd) - log_mass + law.logpdf(s2) + u)

    center = math.log(nu1 * eta1_2 / (nu1 + 2.0))
    value, _ = integrate.quad(integrand, center - 30.0, center + 40.0, points=[center], limit=400)
    return value


class TestSlabMarginalDensity:
    """The slab prior with its variance integrated out."""

    def test_cauchy_at_zero(self):
        assert slab_marginal_density(0.0, 1.0, 100.0, 0.0) == pytest.approx(
            1.0 / (10.0 * math.pi), rel=1e-8
        )

    @pytest.mark.parametrize("beta", [0.5, 3.0, 25.0])
    def test_cauchy_away_from_zero(self, beta):
        expected = stats.cauchy(scale=10.0).pdf(beta)
        assert slab_marginal_density(beta, 1.0, 100.0, 0.0) == pytest.approx(expected, rel=1e-8)

    def test_symmetric(self):
        assert slab_marginal_density(0.5, 1.0, 100.0, 0.5) == pytest.approx(
            slab_marginal_density(-0.5, 1.0, 100.0, 0.5), rel=1e-13
        )

    @pytest.mark.parametrize(
        "beta,nu1,eta1_2,delta",
        [(0.5, 1.0, 100.0, 0.5), (0.05, 1.0, 100.0, 0.05), (1.2, 3.0, 4.0, 0.8)],
    )
    def test_matches_independent_quadrature(self, beta, nu1, eta1_2, delta):
        value = slab_marginal_density(beta, nu1, eta1_2, delta)
        assert value == pytest.approx(slab_marginal_oracle(beta, nu1, eta1_2, delta), rel=1e-6)

    def test_inside_spike_rejected(self):
        with pytest.raises(InvalidArgumentError):
            slab_marginal_density(0.3, 1.0, 100.0, 0.5)


class TestCalibrateSigma0:
    """Spike variance root solve."""

    @pytest.mark.parametrize("delta", [0.8, 0.5, 0.05, 0.01, 0.001])
    def test_residual(self, delta):
        sigma0_2 = calibrate_sigma0(delta, 1.0, 100.0)
        slab = slab_marginal_density(delta, 1.0, 100.0, delta)
        spike = spike_boundary_density(delta, sigma0_2)
        assert abs(spike - slab) / slab <= 1e-6
        assert abs(math.log(spike) - math.log(slab)) <= CALIBRATION_TOLERANCE

    def test_bracket_endpoints(self):
        delta = 0.5
        slab = slab_marginal_density(delta, 1.0, 100.0, delta)
        assert spike_boundary_density(delta, 1e-8) < slab < spike_boundary_density(
            delta, 1e8 * delta * delta
        )

    def test_spike_boundary_density_below_supremum(self):
        for s2 in (1e-3, 1.0, 1e6):
            assert spike_boundary_density(0.5, s2) < 1.0 / (2.0 * 0.5)

    def test_spike_variance_shrinks_with_delta(self):
        values = [calibrate_sigma0(d, 1.0, 100.0) for d in (0.8, 0.5, 0.05)]
        assert values[0] > values[1] > values[2] > 0.0

    def test_cached(self):
        calibrate_sigma0.cache_clear()
        calibrate_sigma0(0.5, 1.0, 100.0)
        calibrate_sigma0(0.5, 1.0, 100.0)
        assert calibrate_sigma0.cache_info().hits == 1

    @pytest.mark.parametrize("delta", [0.0, -0.5])
    def test_requires_positive_delta(self, delta):
        with pytest.raises(InvalidArgumentError):
            calibrate_sigma0(delta, 1.0, 100.0)

    def test_infeasible(self, monkeypatch):
        calibrate_sigma0.cache_clear()
        monkeypatch.setattr(distributions, "slab_marginal_density", lambda *args: 5.0)
        with pytest.raises(CalibrationInfeasibleError) as exc:
            calibrate_sigma0(0.5, 1.0, 7.0)
        assert exc.value.exit_code == 2
        assert exc.value.details["spikeSupremum"] == pytest.approx(1.0)
        calibrate_sigma0.cache_clear()
