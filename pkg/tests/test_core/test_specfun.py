"""Tests for the special-function kernels."""

import math

import numpy as np
import pytest
from scipy import special

from app.core.exceptions import DomainError
from app.core.specfun import (
    abs_gauss_quantile,
    abs_gauss_tail_quantile,
    gaussian_abs_moment,
    ln_gamma,
    mills_ratio,
    mills_ratio_bracket,
    std_normal_cdf,
    std_normal_inv_cdf,
    std_normal_pdf,
)


class TestLnGamma:
    """Tests for ln_gamma."""

    def test_known_values(self):
        """ln Gamma(1) = 0, ln Gamma(1/2) = ln sqrt(pi), ln Gamma(5) = ln 24."""
        assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
        assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-14)
        assert ln_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)

    def test_large_argument_is_finite(self):
        """Large arguments do not overflow."""
        value = ln_gamma(1e6)
        assert math.isfinite(value)
        assert value == pytest.approx(math.lgamma(1e6), rel=1e-14)

    @pytest.mark.parametrize("x", [0.0, -1.0, -0.5])
    def test_non_positive_raises(self, x):
        """Non-positive arguments are a domain error."""
        with pytest.raises(DomainError, match="x > 0"):
            ln_gamma(x)


class TestNormalDistribution:
    """Tests for the normal cdf, density and inverse cdf."""

    def test_cdf_and_pdf_at_zero(self):
        """Phi(0) = 1/2 and phi(0) = 1/sqrt(2 pi)."""
        assert std_normal_cdf(0.0) == pytest.approx(0.5)
        assert std_normal_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))

    def test_inverse_at_half_is_zero(self):
        """Phi^{-1}(1/2) = 0."""
        assert std_normal_inv_cdf(0.5) == pytest.approx(0.0, abs=1e-15)

    def test_known_quantile(self):
        """Phi^{-1}(0.975) is the familiar 1.959963984540054."""
        assert std_normal_inv_cdf(0.975) == pytest.approx(1.959963984540054, rel=1e-13)

    def test_round_trip_on_grid(self):
        """Phi^{-1}(Phi(x)) recovers x on the body of the distribution."""
        x = np.linspace(-8.0, 8.0, 1601)
        recovered = std_normal_inv_cdf(std_normal_cdf(x))
        # Phi(x) rounds to within 1e-16 of 1 for large x.
        body = np.abs(x) <= 5.0
        np.testing.assert_allclose(recovered[body], x[body], atol=1e-9)

    def test_round_trip_log_grid(self):
        """Phi(Phi^{-1}(s)) = s to 1e-12 relative on 10^4 log-spaced s in [1e-300, 1/2]."""
        s = np.logspace(-300.0, math.log10(0.5), 10_000)
        recovered = std_normal_cdf(std_normal_inv_cdf(s))
        assert float(np.max(np.abs(recovered - s) / s)) <= 1e-12

    def test_far_lower_tail(self):
        """The log-space refinement reaches s = 1e-300."""
        x = std_normal_inv_cdf(1e-300)
        assert math.isfinite(x)
        assert float(special.log_ndtr(x)) == pytest.approx(math.log(1e-300), rel=1e-12)

    def test_symmetry(self):
        """Phi^{-1}(1 - s) = -Phi^{-1}(s) for exactly representable complements."""
        s = np.array([2.0 ** -30, 2.0 ** -12, 0.0078125, 0.25, 0.375])
        np.testing.assert_allclose(std_normal_inv_cdf(1.0 - s), -std_normal_inv_cdf(s), rtol=1e-9)

    def test_scalar_returns_float(self):
        """Scalar input gives a Python float."""
        assert isinstance(std_normal_inv_cdf(0.3), float)

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.1, 1.5])
    def test_out_of_range_raises(self, s):
        """Probabilities outside (0, 1) are rejected."""
        with pytest.raises(DomainError):
            std_normal_inv_cdf(s)


class TestGaussianAbsMoment:
    """Tests for sigma_p^p = E|g|^p."""

    def test_small_orders(self):
        """E|g| = sqrt(2/pi), E g^2 = 1, E|g|^3 = 2 sqrt(2/pi), E g^4 = 3."""
        assert gaussian_abs_moment(1.0).value == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-14)
        assert gaussian_abs_moment(2.0).value == pytest.approx(1.0, rel=1e-14)
        assert gaussian_abs_moment(3.0).value == pytest.approx(2.0 * math.sqrt(2.0 / math.pi), rel=1e-14)
        assert gaussian_abs_moment(4.0).value == pytest.approx(3.0, rel=1e-14)

    def test_zero_order(self):
        """E|g|^0 = 1."""
        assert gaussian_abs_moment(0.0).value == pytest.approx(1.0)

    def test_overflow_keeps_log(self):
        """Huge orders report infinity but keep a finite log and root."""
        moment = gaussian_abs_moment(400.0)
        assert not moment.representable
        assert math.isfinite(moment.log_value)
        # sigma_p ~ sqrt(p/e) for large p.
        assert moment.root(400.0) == pytest.approx(math.sqrt(400.0 / math.e), rel=0.02)

    def test_negative_order_raises(self):
        """Negative orders are rejected."""
        with pytest.raises(DomainError):
            gaussian_abs_moment(-1.0)

    def test_log_convex_on_grid(self):
        """Second differences of log sigma_p^p are non-negative for p in [0, 500]."""
        grid = np.linspace(0.0, 500.0, 5001)
        logs = np.array([gaussian_abs_moment(float(p)).log_value for p in grid])
        assert np.all(np.diff(logs, 2) >= -1e-10)

    def test_log_convex_interpolation(self, rng):
        """log sigma_q^q lies below the chord through p and r for p < q < r."""
        for _ in range(2000):
            p, q, r = np.sort(rng.uniform(0.0, 60.0, 3))
            if r - p < 1e-6:
                continue
            w = (q - p) / (r - p)
            chord = (1 - w) * gaussian_abs_moment(float(p)).log_value + w * gaussian_abs_moment(float(r)).log_value
            assert gaussian_abs_moment(float(q)).log_value <= chord + 1e-12


class TestMillsRatio:
    """Tests for Mill's ratio and its bracket."""

    def test_bracket_holds_on_grid(self):
        """a/(1+a^2) <= M(a) <= 1/a on 1000 points."""
        for a in np.linspace(0.01, 40.0, 1000):
            lower, upper = mills_ratio_bracket(float(a))
            value = mills_ratio(float(a))
            assert lower <= value * (1 + 1e-13)
            assert value <= upper * (1 + 1e-13)

    def test_value_at_zero(self):
        """M(0) = sqrt(pi/2)."""
        assert mills_ratio(0.0) == pytest.approx(math.sqrt(math.pi / 2.0))

    def test_bracket_rejects_non_positive(self):
        """The bracket needs a > 0."""
        with pytest.raises(DomainError):
            mills_ratio_bracket(0.0)


class TestAbsGaussQuantile:
    """Tests for quantiles of |g|."""

    def test_median(self):
        """The median of |g| is Phi^{-1}(3/4)."""
        assert abs_gauss_quantile(0.5) == pytest.approx(0.6744897501960817, rel=1e-12)

    def test_matches_tail_form(self):
        """xi_s from s and from the tail 1 - s agree."""
        for s in (0.1, 0.3, 0.6, 0.9, 0.999):
            assert abs_gauss_quantile(s) == pytest.approx(float(abs_gauss_tail_quantile(1.0 - s)), rel=1e-10)

    def test_definition(self):
        """P(|g| <= xi_s) = 2 Phi(xi_s) - 1 = s."""
        for s in (0.05, 0.5, 0.95):
            xi = abs_gauss_quantile(s)
            assert 2.0 * std_normal_cdf(xi) - 1.0 == pytest.approx(s, rel=1e-10)

    def test_tiny_tail(self):
        """Tail masses far below double epsilon keep full precision."""
        xi = float(abs_gauss_tail_quantile(1e-20))
        assert 2.0 * float(special.ndtr(-xi)) == pytest.approx(1e-20, rel=1e-9)

    @pytest.mark.parametrize("s", [0.0, 1.0])
    def test_out_of_range_raises(self, s):
        """s must lie in (0, 1)."""
        with pytest.raises(DomainError):
            abs_gauss_quantile(s)
