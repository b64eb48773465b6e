"""
Deterministic quadrature oracles for Gaussian functionals.

Both integrals are evaluated with QUADPACK's adaptive Gauss-Kronrod rule;
the integrands are written in log-space so that high powers neither
overflow nor lose their small tails.
"""

import logging
import math

import numpy as np
from scipy import integrate, special

from app.core.exceptions import EvaluationError, require
from app.engine.theory import gumbel_location

logger = logging.getLogger(__name__)

PAIR_MOMENT_MAX_PR = 600.0
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 400


def _pair_integrand(theta: float, p: float, r: float) -> float:
    """(cos^p theta - sin^p theta)^r on [0, pi/4]."""
    if theta <= 0.0:
        return 1.0
    tan_p = math.tan(theta) ** p
    if tan_p >= 1.0:
        return 0.0
    return math.exp(r * (p * math.log(math.cos(theta)) + math.log1p(-tan_p)))


def pair_moment_quadrature(p: float, r: float) -> float:
    """
    E||g_1|^p - |g_2|^p|^r by polar coordinates.

    The value is (2^{pr/2+2} / pi) Gamma(pr/2 + 1) times the integral of
    (cos^p theta - sin^p theta)^r over [0, pi/4]; the prefactor is combined
    with the integral in log-space.

    Args:
        p: Exponent p >= 1
        r: Moment order r >= 1

    Returns:
        float: The moment

    Raises:
        DomainError: If p r exceeds the log-Gamma guard or p, r are out of range
    """
    require(p >= 1, f"pair_moment_quadrature requires p >= 1, got {p}")
    require(r >= 1, f"pair_moment_quadrature requires r >= 1, got {r}")
    require(p * r <= PAIR_MOMENT_MAX_PR,
            f"pair_moment_quadrature requires p*r <= {PAIR_MOMENT_MAX_PR:g}, got {p * r:g}")
    upper = math.pi / 4.0
    knee = min(upper / 2.0, 1.0 / math.sqrt(p * r))
    integral, abserr = integrate.quad(
        _pair_integrand, 0.0, upper, args=(p, r),
        epsabs=1e-15, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, points=[knee],
    )
    if not integral > 0:
        raise EvaluationError(f"pair moment integral vanished for p={p}, r={r}")
    logger.debug(f"Pair moment quadrature p={p}, r={r}: integral={integral:.6e} (err {abserr:.1e})")
    log_prefactor = (0.5 * p * r + 2.0) * math.log(2.0) - math.log(math.pi) + float(special.gammaln(0.5 * p * r + 1.0))
    return math.exp(log_prefactor + math.log(integral))


def _max_abs_survival(t: float, n: int) -> float:
    """P(max |g_i| > t) = 1 - (1 - erfc(t / sqrt 2))^n."""
    tail = float(special.erfc(t / math.sqrt(2.0)))
    if tail >= 1.0:
        return 1.0
    return -math.expm1(n * math.log1p(-tail))


def expected_max_abs(n: int) -> float:
    """
    E||X||_inf for X ~ N(0, I_n) as the integral of P(||X||_inf > t).

    Args:
        n: Dimension, at least 1

    Returns:
        float: Expected maximum absolute coordinate
    """
    require(n >= 1, f"expected_max_abs requires n >= 1, got {n}")
    location = gumbel_location(n) if n >= 2 else 0.6744897501960817
    upper = math.sqrt(2.0 * math.log(2.0 * n)) + 12.0
    breaks = [b for b in (location - 2.0 / location, location, location + 4.0 / location)
              if 0.0 < b < upper]
    value, _ = integrate.quad(
        _max_abs_survival, 0.0, upper, args=(n,),
        epsabs=1e-13, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, points=breaks or None,
    )
    return float(value)


def gaussian_abs_moment_quadrature(p: float) -> float:
    """E|g|^p by direct quadrature of 2 t^p phi(t); a cross-check for the closed form."""
    require(p >= 0, f"gaussian_abs_moment_quadrature requires p >= 0, got {p}")

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 1.0 if p == 0 else 0.0
        return math.exp(p * math.log(t) - 0.5 * t * t)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-14, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
    return 2.0 * value / math.sqrt(2.0 * math.pi)
