"""
Special functions behind every closed-form quantity in the lab.

Log-Gamma, the standard normal CDF and its inverse, absolute Gaussian
moments, Mill's-ratio brackets and quantiles of |g|. Moment arithmetic is
carried out in log-space because E|g|^p overflows near p = 300.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from pydantic import Field
from scipy import special
from typing_extensions import Annotated

from app.core.exceptions import require

ArrayLike = Union[float, np.ndarray]

# Real number in [0, 1]; arguments of Phi and of the |g| quantiles.
Probability = Annotated[float, Field(ge=0.0, le=1.0)]

LOG_SQRT_PI = 0.5 * math.log(math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_FLOAT_MAX = math.log(np.finfo(float).max)

# Acklam's rational approximation of the lower-tail normal quantile.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425
_NEWTON_STEPS = 2


@dataclass(frozen=True)
class MomentValue:
    """
    Absolute Gaussian moment sigma_p^p = E|g|^p.

    Attributes:
        log_value: Natural log of sigma_p^p
        value: sigma_p^p, or infinity when it is not representable
    """

    log_value: float
    value: float

    @property
    def representable(self) -> bool:
        """Whether ``value`` holds the moment without overflow."""
        return math.isfinite(self.value)

    def root(self, p: float) -> float:
        """Return sigma_p = (sigma_p^p)^(1/p) computed from the log."""
        return math.exp(self.log_value / p)


def ln_gamma(x: float) -> float:
    """
    Natural logarithm of the Gamma function.

    Args:
        x: Positive real argument

    Returns:
        float: ln Gamma(x)

    Raises:
        DomainError: If x is not positive
    """
    require(x > 0, f"ln_gamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def std_normal_cdf(x: ArrayLike) -> ArrayLike:
    """Standard normal distribution function Phi(x)."""
    return special.ndtr(x)


def std_normal_pdf(x: ArrayLike) -> ArrayLike:
    """Standard normal density phi(x)."""
    return np.exp(-0.5 * np.square(x) - LOG_SQRT_2PI)


def _acklam_lower(q: np.ndarray) -> np.ndarray:
    """Initial guess for Phi^{-1}(q) on 0 < q <= 1/2."""
    x = np.empty_like(q)
    tail = q < _P_LOW
    if np.any(tail):
        t = np.sqrt(-2.0 * np.log(q[tail]))
        num = ((((_C[0] * t + _C[1]) * t + _C[2]) * t + _C[3]) * t + _C[4]) * t + _C[5]
        den = (((_D[0] * t + _D[1]) * t + _D[2]) * t + _D[3]) * t + 1.0
        x[tail] = num / den
    mid = ~tail
    if np.any(mid):
        u = q[mid] - 0.5
        r = u * u
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * u
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    return x


def _lower_quantile(q: np.ndarray) -> np.ndarray:
    """Phi^{-1}(q) for 0 < q <= 1/2, refined by Newton steps in log-space."""
    x = _acklam_lower(q)
    log_q = np.log(q)
    for _ in range(_NEWTON_STEPS):
        # Phi(x) - q = q * expm1(log Phi(x) - log q); divide by phi(x) in logs.
        rel = np.expm1(special.log_ndtr(x) - log_q)
        x = x - rel * np.exp(log_q + 0.5 * x * x + LOG_SQRT_2PI)
    return x


def std_normal_inv_cdf(s: ArrayLike) -> ArrayLike:
    """
    Inverse of the standard normal distribution function.

    A rational initial guess is refined by Newton steps on the CDF. The
    upper half is obtained by symmetry from the exactly representable
    complement 1 - s.

    Args:
        s: Probability (scalar or array) in the open interval (0, 1)

    Returns:
        Phi^{-1}(s) with the shape of ``s``

    Raises:
        DomainError: If any s lies outside (0, 1)
    """
    arr = np.asarray(s, dtype=float)
    require(bool(np.all((arr > 0.0) & (arr < 1.0))),
            "std_normal_inv_cdf requires 0 < s < 1")
    upper = arr > 0.5
    q = np.where(upper, 1.0 - arr, arr)
    x = _lower_quantile(np.atleast_1d(q)).reshape(q.shape)
    x = np.where(upper, -x, x)
    if np.ndim(s) == 0:
        return float(x)
    return x


def gaussian_abs_moment(p: float) -> MomentValue:
    """
    Absolute moment sigma_p^p = E|g|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi).

    Args:
        p: Order p >= 0

    Returns:
        MomentValue: log and (when representable) plain value of the moment

    Raises:
        DomainError: If p is negative
    """
    require(p >= 0, f"gaussian_abs_moment requires p >= 0, got {p}")
    log_value = 0.5 * p * math.log(2.0) + float(special.gammaln(0.5 * (p + 1.0))) - LOG_SQRT_PI
    value = math.exp(log_value) if log_value < _LOG_FLOAT_MAX else math.inf
    return MomentValue(log_value=log_value, value=value)


def mills_ratio(a: float) -> float:
    """Exact Mill's ratio e^{a^2/2} int_a^inf e^{-t^2/2} dt via the scaled erfc."""
    return math.sqrt(math.pi / 2.0) * float(special.erfcx(a / math.sqrt(2.0)))


def mills_ratio_bracket(a: float) -> Tuple[float, float]:
    """
    Gordon's two-sided bracket of Mill's ratio.

    Args:
        a: Positive real

    Returns:
        Tuple[float, float]: (a / (1 + a^2), 1 / a)

    Raises:
        DomainError: If a is not positive
    """
    require(a > 0, f"mills_ratio_bracket requires a > 0, got {a}")
    return a / (1.0 + a * a), 1.0 / a


def abs_gauss_tail_quantile(tail: ArrayLike) -> ArrayLike:
    """
    Quantile of |g| given the upper-tail mass ``tail`` = 1 - s.

    Working with the tail keeps full precision for s close to 1, where the
    quantile vectors of the anti-concentration experiment live.
    """
    arr = np.asarray(tail, dtype=float)
    require(bool(np.all((arr > 0.0) & (arr < 1.0))), "tail mass must lie in (0, 1)")
    return -std_normal_inv_cdf(0.5 * arr)


def abs_gauss_quantile(s: float) -> float:
    """
    Quantile xi_s of |g|, i.e. P(|g| <= xi_s) = s.

    Args:
        s: Probability in the open interval (0, 1)

    Returns:
        float: xi_s = Phi^{-1}((1 + s) / 2)

    Raises:
        DomainError: If s lies outside (0, 1)
    """
    require(0.0 < s < 1.0, f"abs_gauss_quantile requires 0 < s < 1, got {s}")
    if s >= 0.5:
        return float(abs_gauss_tail_quantile(1.0 - s))
    return float(std_normal_inv_cdf(0.5 * (1.0 + s)))
