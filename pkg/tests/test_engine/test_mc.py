"""Tests for the Monte Carlo estimators."""

import math

import numpy as np
import pytest

from app.config import settings
from app.core.exceptions import DomainError
from app.engine import mc
from app.engine.quadrature import pair_moment_quadrature
from app.engine.theory import pair_moment_second, top_order_interval_probability
from app.schemas.estimates import Centering, TailSide
from tests.conftest import brute_force_levy, within_se


class TestWilsonEstimate:
    """Tests for binomial proportions."""

    def test_half(self):
        """50 of 100 gives the Wilson interval [0.4038, 0.5962]."""
        estimate = mc.wilson_estimate(50, 100, ci_z=1.96)
        assert estimate.value == 0.5
        assert estimate.ci_low == pytest.approx(0.4038, abs=1e-4)
        assert estimate.ci_high == pytest.approx(0.5962, abs=1e-4)

    def test_zero_hits_is_upper_bound_only(self):
        """No hits gives a zero lower end and the upper-bound flag."""
        estimate = mc.wilson_estimate(0, 1000)
        assert estimate.upper_bound_only
        assert estimate.ci_low == 0.0
        assert 0.0 < estimate.ci_high < 0.01

    def test_all_hits(self):
        """All hits keeps the interval inside [0, 1]."""
        estimate = mc.wilson_estimate(20, 20)
        assert estimate.value == 1.0
        assert estimate.ci_high == 1.0

    def test_invalid_counts(self):
        """Hits above the total are rejected."""
        with pytest.raises(DomainError):
            mc.wilson_estimate(5, 4)


class TestNormMoments:
    """Tests for estimate_norm_moments."""

    def test_l1_mean_and_variance(self, seed):
        """For p = 1, n = 100: mean 100 sqrt(2/pi), variance 100 (1 - 2/pi)."""
        summary, _ = mc.estimate_norm_moments(100, 1.0, 20_000, seed)
        assert within_se(summary.mean, 100 * math.sqrt(2.0 / math.pi))
        assert within_se(summary.variance, 100 * (1.0 - 2.0 / math.pi))

    def test_single_coordinate(self, seed):
        """n = 1 gives mean sigma_1 = sqrt(2/pi)."""
        summary, _ = mc.estimate_norm_moments(1, 1.0, 20_000, seed)
        assert within_se(summary.mean, math.sqrt(2.0 / math.pi))

    def test_euclidean_mean(self, seed):
        """p = 2, n = 16 gives mean about 3.9377."""
        summary, _ = mc.estimate_norm_moments(16, 2.0, 20_000, seed)
        assert within_se(summary.mean, 3.9377)

    def test_profile_is_monotone_in_r(self, seed):
        """Empirical power means do not decrease in r."""
        _, profile = mc.estimate_norm_moments(20, 3.0, 5_000, seed, r_grid=[-4.0, -1.0, 0.0, 1.0, 2.0, 6.0])
        values = [row.estimate.value for row in profile.rows]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))

    def test_second_moment_p2(self, seed):
        """I_2 of the Euclidean norm is sqrt(n)."""
        _, profile = mc.estimate_norm_moments(25, 2.0, 20_000, seed, r_grid=[2.0])
        assert within_se(profile.rows[0].estimate, 5.0)

    def test_very_negative_order_is_flagged(self, seed):
        """Orders r <= -n/4 are marked unstable."""
        _, profile = mc.estimate_norm_moments(8, 2.0, 1_000, seed, r_grid=[-3.0, 1.0])
        assert profile.rows[0].estimate.unstable
        assert not profile.rows[1].estimate.unstable

    def test_order_below_minus_n_rejected(self, seed):
        """r <= -n is a domain error."""
        with pytest.raises(DomainError):
            mc.estimate_norm_moments(4, 2.0, 1_000, seed, r_grid=[-4.0])

    def test_too_few_samples(self, seed):
        """At least 100 samples are needed."""
        with pytest.raises(DomainError):
            mc.estimate_norm_moments(4, 2.0, 50, seed)

    def test_independent_of_workers(self, seed, monkeypatch):
        """Several chunks give identical statistics inline and in a pool."""
        monkeypatch.setattr(settings, "MAX_CHUNK_ROWS", 300)
        inline = mc.estimate_norm_moments(30, 3.0, 1_500, seed, r_grid=[1.0, 2.0], workers=1)
        pooled = mc.estimate_norm_moments(30, 3.0, 1_500, seed, r_grid=[1.0, 2.0], workers=2)
        assert inline[0] == pooled[0]
        assert inline[1] == pooled[1]


class TestTailCurve:
    """Tests for tail_curve."""

    def test_zero_eps_is_certain(self, seed):
        """P(|S - m| > 0) = 1."""
        curve = mc.tail_curve(50, 2.0, [0.0], 2_000, seed)
        assert curve.rows[0].prob.value == 1.0

    def test_non_increasing_in_eps(self, seed):
        """Hit counts decrease along the eps grid."""
        curve = mc.tail_curve(50, 3.0, [0.0, 0.02, 0.05, 0.1, 0.3], 5_000, seed)
        hits = [row.hits for row in curve.rows]
        assert hits == sorted(hits, reverse=True)

    def test_below_lipschitz_envelope(self, seed):
        """For p = 1 the probability stays below 2 exp(-t^2/(2 pi^2 n)) plus 3 SE."""
        curve = mc.tail_curve(100, 1.0, [0.05, 0.1, 0.2], 20_000, seed)
        for row in curve.rows:
            assert row.prob.value <= row.envelope + 3.0 * row.prob.std_error

    def test_sides_add_up(self, seed):
        """Lower and upper hits add up to the two-sided hits."""
        grid = [0.02, 0.05]
        both = mc.tail_curve(40, 4.0, grid, 3_000, seed, side=TailSide.TWO_SIDED)
        lower = mc.tail_curve(40, 4.0, grid, 3_000, seed, side=TailSide.LOWER)
        upper = mc.tail_curve(40, 4.0, grid, 3_000, seed, side=TailSide.UPPER)
        for b, lo, up in zip(both.rows, lower.rows, upper.rows):
            assert b.hits == lo.hits + up.hits

    def test_theory_centre(self, seed):
        """Closed-form centring uses n sqrt(2/pi) for p = 1."""
        curve = mc.tail_curve(30, 1.0, [0.1], 1_000, seed, centering=Centering.THEORY_MEAN)
        assert curve.center == pytest.approx(30 * math.sqrt(2.0 / math.pi))

    def test_theory_centre_unavailable(self, seed):
        """Closed-form centring is limited to p in {1, 2, inf}."""
        with pytest.raises(DomainError):
            mc.tail_curve(30, 3.0, [0.1], 1_000, seed, centering=Centering.THEORY_MEAN)

    def test_eps_range(self, seed):
        """eps above the grid limit is rejected."""
        with pytest.raises(DomainError):
            mc.tail_curve(30, 2.0, [11.0], 1_000, seed)


class TestLevyConcentration:
    """Tests for the sliding-window Levy estimate."""

    def test_matches_brute_force(self, rng):
        """The binary-search count equals the exhaustive window count."""
        values = np.sort(rng.standard_normal(400))
        for t in (0.0, 0.01, 0.1, 0.5):
            estimate = mc.levy_concentration(values, t)
            assert round(estimate.value * values.size) == brute_force_levy(values, t)

    def test_wide_window(self, rng):
        """t >= (max - min)/2 captures everything."""
        values = np.sort(rng.standard_normal(100))
        assert mc.levy_concentration(values, float(values[-1] - values[0]) / 2.0).value == 1.0

    def test_constant_sample(self):
        """A constant sample is fully concentrated for every t."""
        assert mc.levy_concentration(np.full(10, 2.5), 0.0).value == 1.0

    def test_uniform(self, stream):
        """For uniforms Q(t) is about 2t."""
        values = np.sort(stream.uniform(200_000))
        assert mc.levy_concentration(values, 0.05).value == pytest.approx(0.1, abs=0.01)

    def test_unsorted_rejected(self):
        """Input must be sorted."""
        with pytest.raises(DomainError):
            mc.levy_concentration(np.array([2.0, 1.0]), 0.1)


class TestPairPowerMoment:
    """Tests for pair_power_moment_mc."""

    def test_second_moment(self, seed):
        """r = 2 matches sqrt(2n (sigma_{2p}^{2p} - sigma_p^{2p}))."""
        estimate = mc.pair_power_moment_mc(10, 3.0, 2.0, 20_000, seed)
        assert within_se(estimate, pair_moment_second(10, 3.0))

    def test_single_coordinate_matches_quadrature(self, seed):
        """n = 1 agrees with the quadrature oracle."""
        estimate = mc.pair_power_moment_mc(1, 2.0, 1.0, 20_000, seed)
        assert within_se(estimate, pair_moment_quadrature(2.0, 1.0))

    def test_needs_enough_samples(self, seed):
        """Fewer than 10000 pairs is rejected."""
        with pytest.raises(DomainError):
            mc.pair_power_moment_mc(5, 3.0, 2.0, 500, seed)

    def test_first_order_matches_quadrature_p3(self, seed):
        """r = 1 is admitted for the single-coordinate comparison with quadrature."""
        estimate = mc.pair_power_moment_mc(1, 3.0, 1.0, 20_000, seed)
        assert within_se(estimate, pair_moment_quadrature(3.0, 1.0))

    @pytest.mark.parametrize("r", [0.5, 0.0, -1.0])
    def test_order_below_one_rejected(self, seed, r):
        """Orders below 1 are not norms of the difference and are rejected."""
        with pytest.raises(DomainError, match="r >= 1"):
            mc.pair_power_moment_mc(5, 3.0, r, 10_000, seed)


class TestAnticoncentration:
    """Tests for the large-p anti-concentration experiment."""

    def test_no_violations(self, seed):
        """The deterministic facts hold on every Q1 sample."""
        report = mc.anticoncentration_experiment(20, 40.0, 0.1, 20_000, seed)
        assert report.pnorm_violations == 0
        assert report.distance_violations == 0
        assert report.q1_count > 0

    def test_top_in_range_probability(self, seed):
        """P(y_1 <= z_1 <= y_0) matches the exact value."""
        report = mc.anticoncentration_experiment(20, 40.0, 0.1, 20_000, seed)
        assert within_se(report.prob_top_in_range, top_order_interval_probability(20))

    def test_top_orders_below_bound(self, seed):
        """P(z_i >= y_{floor(i/e^2)}) is consistent with exp(-i)."""
        report = mc.anticoncentration_experiment(20, 40.0, 0.1, 20_000, seed)
        for row in report.top_order_tail:
            assert row.estimate.ci_low <= row.bound

    def test_requires_large_p(self, seed):
        """p below 12 log n is rejected."""
        with pytest.raises(DomainError):
            mc.anticoncentration_experiment(20, 10.0, 0.1, 1_000, seed)


class TestReverseConcentration:
    """Tests for reverse_concentration_check."""

    def test_slope_is_negative(self, seed):
        """When fitted, log prob decreases with eps log n."""
        curve = mc.reverse_concentration_check(20, "inf", [0.05, 0.1, 0.15, 0.2, 0.3], 20_000, seed)
        assert curve.fitted_slope is None or curve.fitted_slope < 0

    def test_requires_large_p(self, seed):
        """p below (log n)^2 is rejected."""
        with pytest.raises(DomainError):
            mc.reverse_concentration_check(100, 5.0, [0.1], 1_000, seed)


class TestSuperconcentration:
    """Tests for the gradient and the superconcentration profile."""

    def test_euclidean_gradient_has_unit_norm(self, rng):
        """||grad ||x||_2|| = 1."""
        np.testing.assert_allclose(mc.gradient_norm_sq(rng.standard_normal((5, 7)), 2.0), 1.0)

    def test_infinity_gradient(self, rng):
        """The max-norm gradient is a coordinate vector."""
        np.testing.assert_array_equal(mc.gradient_norm_sq(rng.standard_normal((3, 4)), math.inf), 1.0)

    def test_variance_below_poincare(self, seed):
        """Var||X||_p <= E||grad||^2 up to sampling error."""
        row = mc.superconcentration_profile(50, 4.0, 5_000, seed)
        assert row.variance.value <= row.poincare.value + 4.0 * row.variance.std_error
        assert row.lipschitz == 1.0
