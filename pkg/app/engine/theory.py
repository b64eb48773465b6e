"""
Closed-form predictions.

Each piecewise formula returns a TheoryPrediction carrying the branch that
fired. Logarithms are natural. At a regime boundary the lower-p (or
lower-eps) branch wins. Quantities that overflow for large p are assembled
from log-moments.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from app.core.exceptions import require
from app.core.gauss import PExponent, as_exponent
from app.core.specfun import (
    abs_gauss_tail_quantile,
    gaussian_abs_moment,
    std_normal_inv_cdf,
)
from app.schemas.estimates import TailSide
from app.schemas.theory import TheoryConstants, TheoryPrediction

PLike = Union[float, str, PExponent]

EULER_GAMMA = 0.5772156649015329
GUMBEL_VARIANCE = math.pi ** 2 / 6.0
QUANTILE_GAP_FRACTION = 0.317
DUDLEY_SUM_RTOL = 1e-12


def _constants(constants: Optional[TheoryConstants]) -> TheoryConstants:
    return constants if constants is not None else TheoryConstants.from_settings()


def _check_eps(eps: float) -> None:
    require(0 < eps < 1, f"eps must lie in (0, 1), got {eps}")


def _prediction(quantity: str, value: float, regime: str, constants: TheoryConstants,
                lower_bound: Optional[float] = None) -> TheoryPrediction:
    return TheoryPrediction(
        quantity=quantity,
        value=float(value),
        regime=regime,
        constants_used=constants,
        lower_bound=None if lower_bound is None else float(lower_bound),
    )


def log_sigma_power(p: float) -> float:
    """ln sigma_p^p."""
    return gaussian_abs_moment(p).log_value


def sigma(p: float) -> float:
    """sigma_p = (E|g|^p)^(1/p)."""
    require(p > 0, f"sigma_p requires p > 0, got {p}")
    return gaussian_abs_moment(p).root(p)


def mean_lp_prediction(n: int, p: PLike,
                       constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    Prediction for E||X||_p.

    Exact for p = 1 and p = 2; otherwise the order of magnitude
    n^{1/p} sqrt(p) below log n and sqrt(log n) above.

    Args:
        n: Dimension, at least 2
        p: Norm index

    Returns:
        TheoryPrediction: Value and regime
    """
    require(n >= 2, f"mean_lp_prediction requires n >= 2, got {n}")
    p = as_exponent(p)
    consts = _constants(constants)
    log_n = math.log(n)
    if p == 1.0:
        return _prediction("mean", n * math.sqrt(2.0 / math.pi), "exact p = 1", consts)
    if p == 2.0:
        value = math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0))
        return _prediction("mean", value, "exact p = 2", consts)
    if p <= log_n:
        return _prediction("mean", n ** (1.0 / p) * math.sqrt(p), "p <= log n", consts)
    return _prediction("mean", math.sqrt(log_n), "p > log n", consts)


def critical_dimension(n: int, p: PLike,
                       constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """Critical dimension k_{p,n}: n, p n^{2/p} or log n depending on p."""
    require(n >= 2, f"critical_dimension requires n >= 2, got {n}")
    p = as_exponent(p)
    consts = _constants(constants)
    log_n = math.log(n)
    if p <= 2.0:
        return _prediction("critical-dimension", n, "1 <= p <= 2", consts)
    if p <= log_n:
        return _prediction("critical-dimension", p * n ** (2.0 / p), "2 < p <= log n", consts)
    return _prediction("critical-dimension", log_n, "p > log n", consts)


def beta_exponent(n: int, p: PLike, eps: float,
                  constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    Exponent beta(n, p, eps) of the two-sided concentration bound.

    Args:
        n: Dimension, at least 2
        p: Norm index
        eps: Relative deviation in (0, 1)
        constants: Threshold constant c0 (defaults from settings)

    Returns:
        TheoryPrediction: beta and the regime

    Raises:
        DomainError: If eps is outside (0, 1) or n < 2
    """
    require(n >= 2, f"beta_exponent requires n >= 2, got {n}")
    _check_eps(eps)
    p = as_exponent(p)
    consts = _constants(constants)
    threshold = consts.c0 * math.log(n)
    if p <= 2.0:
        return _prediction("beta", eps * eps * n, "1 <= p <= 2", consts)
    if math.isinf(p):
        return _prediction("beta", eps * math.log(n), "p = inf", consts)
    large = eps * p * n ** (2.0 / p)
    if p <= threshold:
        gaussian = p * p * 2.0 ** (-p) * eps * eps * n
        value = max(min(gaussian, (eps * n) ** (2.0 / p)), large)
        return _prediction("beta", value, "2 < p <= c0 log n", consts)
    return _prediction("beta", large, "p > c0 log n", consts)


def dvoretzky_dimension(n: int, p: PLike, eps: float,
                        constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    Dimension k(n, p, eps) up to which random sections are (1+eps)-Euclidean.

    For 2 < p <= c0 log n the result also carries the eps-free floor
    log n / log(1/eps) in ``lower_bound``.
    """
    require(n >= 2, f"dvoretzky_dimension requires n >= 2, got {n}")
    _check_eps(eps)
    p = as_exponent(p)
    consts = _constants(constants)
    log_n = math.log(n)
    log_inv_eps = math.log(1.0 / eps)
    if p <= 2.0:
        return _prediction("dvoretzky", eps * eps * n, "1 <= p <= 2", consts)
    if p > consts.c0 * log_n:
        return _prediction("dvoretzky", eps * log_n / log_inv_eps, "p > c0 log n", consts)

    floor = log_n / log_inv_eps
    cp = consts.big_c * p
    breakpoint = cp ** (p / 2.0) * n ** (-(p - 2.0) / (2.0 * (p - 1.0)))
    if eps <= breakpoint:
        value = cp ** (-p) * eps * eps * n
        regime = "eps <= (Cp)^(p/2) n^(-(p-2)/(2(p-1)))"
    elif eps <= 1.0 / p:
        value = (eps * n) ** (2.0 / p) / p
        regime = "(Cp)^(p/2) n^(-(p-2)/(2(p-1))) < eps <= 1/p"
    else:
        value = eps * p * n ** (2.0 / p) / log_inv_eps
        regime = "1/p < eps < 1"
    return _prediction("dvoretzky", value, regime, consts, lower_bound=floor)


def tau(n: int, p: PLike, t: float,
        constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """tau(n, p, t) = max{t^2 p n^{2/p}, min{t^2 n / C^p, (tn)^{2/p}}}."""
    require(t > 0, f"tau requires t > 0, got {t}")
    require(n >= 1, f"tau requires n >= 1, got {n}")
    p = as_exponent(p)
    require(math.isfinite(p), "tau is defined for finite p")
    consts = _constants(constants)
    first = t * t * p * n ** (2.0 / p)
    gaussian = t * t * n * math.exp(-p * math.log(consts.big_c))
    poisson = (t * n) ** (2.0 / p)
    inner, inner_label = (gaussian, "t^2 n / C^p") if gaussian <= poisson else (poisson, "(tn)^(2/p)")
    if first >= inner:
        return _prediction("tau", first, "t^2 p n^(2/p)", consts)
    return _prediction("tau", inner, inner_label, consts)


def psi(n: int, p: PLike, r: float,
        constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    psi(n, p, r), the scale of the r-th moment of ||Ga||_p - ||Gb||_p.

    sqrt(r) min{1/(sigma_p n^{1/p}),
    sigma_{2p-2}^{p-1} / (n^{1/2} sigma_p^p) (1 + pr/(sigma_{2p-2}^2 n^{1/(p-1)}))^{(p-1)/2}}.
    """
    require(r >= 2, f"psi requires r >= 2, got {r}")
    require(n >= 1, f"psi requires n >= 1, got {n}")
    p = as_exponent(p)
    require(1.0 < p < math.inf, f"psi requires 1 < p < inf, got {p}")
    consts = _constants(constants)
    log_sp = log_sigma_power(p)
    log_s2p2 = log_sigma_power(2.0 * p - 2.0)
    log_first = -(log_sp / p) - math.log(n) / p
    sigma_sq = math.exp(log_s2p2 / (p - 1.0))
    growth = math.log1p(p * r / (sigma_sq * n ** (1.0 / (p - 1.0))))
    log_second = 0.5 * log_s2p2 - 0.5 * math.log(n) - log_sp + 0.5 * (p - 1.0) * growth
    if log_first <= log_second:
        return _prediction("psi", math.sqrt(r) * math.exp(log_first), "1/(sigma_p n^(1/p))", consts)
    return _prediction("psi", math.sqrt(r) * math.exp(log_second), "gradient moment", consts)


def theta_exponent(n: int, p: PLike, eps: float,
                   constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    theta(n, p, eps) = min{p^2 eps^2 n / 2^p, (eps n)^{2/p}} for small deviations.

    Raises:
        DomainError: Unless 2 < p < inf and 0 < eps < 1/p
    """
    p = as_exponent(p)
    require(2.0 < p < math.inf, f"theta_exponent requires 2 < p < inf, got {p}")
    require(0 < eps < 1.0 / p, f"theta_exponent requires 0 < eps < 1/p, got {eps}")
    consts = _constants(constants)
    gaussian = p * p * eps * eps * n * 2.0 ** (-p)
    poisson = (eps * n) ** (2.0 / p)
    if gaussian <= poisson:
        return _prediction("theta", gaussian, "p^2 eps^2 n / 2^p", consts)
    return _prediction("theta", poisson, "(eps n)^(2/p)", consts)


def variance_prediction(n: int, p: PLike,
                        constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """Order of Var||X||_p: (2^p/p) n^{2/p-1} below c0 log n, 1/log n above."""
    require(n >= 3, f"variance_prediction requires n >= 3, got {n}")
    p = as_exponent(p)
    consts = _constants(constants)
    log_n = math.log(n)
    if p <= consts.c0 * log_n:
        value = math.exp(p * math.log(2.0) - math.log(p) + (2.0 / p - 1.0) * log_n)
        return _prediction("variance", value, "p <= c0 log n", consts)
    return _prediction("variance", 1.0 / log_n, "p > c0 log n", consts)


def delta_method_variance_limit(p: float) -> float:
    """
    Limit of n^{1-2/p} Var||X||_p as n grows with p fixed.

    (sigma_{2p}^{2p} - sigma_p^{2p}) / (p^2 sigma_p^{2(p-1)}), evaluated
    from log-moments.

    Args:
        p: Finite index p >= 1

    Returns:
        float: The delta-method variance constant
    """
    require(1.0 <= p < math.inf, f"delta_method_variance_limit requires 1 <= p < inf, got {p}")
    log_sp = log_sigma_power(p)
    gap = log_sigma_power(2.0 * p) - 2.0 * log_sp
    log_excess = gap + math.log(-math.expm1(-gap))
    return math.exp(log_excess + 2.0 * log_sp / p - 2.0 * math.log(p))


def delta_method_asymptotic(p: float) -> float:
    """Large-p form 2^p / (e sqrt(2) p) of the delta-method constant."""
    require(p >= 1, f"delta_method_asymptotic requires p >= 1, got {p}")
    return math.exp(p * math.log(2.0) - 1.0 - 0.5 * math.log(2.0) - math.log(p))


def gumbel_location(n: int) -> float:
    """a_n = -Phi^{-1}(1/(2n)), so that P(|g| > a_n) = 1/n."""
    require(n >= 2, f"gumbel_location requires n >= 2, got {n}")
    return -float(std_normal_inv_cdf(0.5 / n))


def gumbel_variance_prediction(n: int,
                               constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """Var||X||_inf ~ (pi^2/6) / a_n^2."""
    a_n = gumbel_location(n)
    return _prediction("gumbel", GUMBEL_VARIANCE / (a_n * a_n), "extreme value limit",
                       _constants(constants))


def gumbel_mean_prediction(n: int,
                           constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """E||X||_inf ~ a_n + gamma / a_n."""
    a_n = gumbel_location(n)
    return _prediction("gumbel-mean", a_n + EULER_GAMMA / a_n, "extreme value limit",
                       _constants(constants))


def gaussian_to_spherical_factor(n: int, r: float) -> float:
    """
    c_{n,r} = sqrt(2) [Gamma((n+r)/2) / Gamma(n/2)]^{1/r}, the factor with
    I_r(gamma_n, A) = c_{n,r} M_r(A).

    Raises:
        DomainError: If r <= -n or r == 0
    """
    require(n >= 1, f"gaussian_to_spherical_factor requires n >= 1, got {n}")
    require(r > -n and r != 0, f"gaussian_to_spherical_factor requires r > -n and r != 0, got {r}")
    return math.sqrt(2.0) * math.exp((math.lgamma((n + r) / 2.0) - math.lgamma(n / 2.0)) / r)


def power_diff_bracket(a: float, b: float, theta: float) -> Tuple[float, float, float]:
    """
    Two-sided bracket of |a^theta - b^theta|.

    Args:
        a: Positive real
        b: Positive real
        theta: Exponent in (0, 1]

    Returns:
        Tuple[float, float, float]: (lower, exact, upper)
    """
    require(a > 0 and b > 0, f"power_diff_bracket requires a, b > 0, got {a}, {b}")
    require(0 < theta <= 1, f"power_diff_bracket requires 0 < theta <= 1, got {theta}")
    gap = abs(a - b)
    lower = theta * gap * (2.0 / (a + b)) ** (1.0 - theta)
    exact = abs(a ** theta - b ** theta)
    upper = theta * gap * (a ** (theta - 1.0) + b ** (theta - 1.0)) / 2.0
    return lower, exact, upper


@dataclass(frozen=True)
class QuantileVector:
    """
    Quantiles y_i = xi_{1-(i-0.5)/n} of |g| (i = 1..n) and y0 = xi_{1-1/(4n)}.

    ``y[i-1]`` holds y_i.
    """

    n: int
    y: np.ndarray
    y0: float

    def level(self, j: int) -> float:
        """y_j with y_0 = y0."""
        return self.y0 if j == 0 else float(self.y[j - 1])

    def thresholds(self) -> np.ndarray:
        """Array t with t[i-1] = y_{floor(i/e^2)} for i = 1..n."""
        levels = np.concatenate(([self.y0], self.y))
        idx = np.floor(np.arange(1, self.n + 1) / math.e ** 2).astype(np.int64)
        return levels[idx]


def quantile_vector(n: int) -> QuantileVector:
    """Quantile vector of |g| used by the anti-concentration experiment."""
    require(n >= 1, f"quantile_vector requires n >= 1, got {n}")
    tails = (np.arange(1, n + 1, dtype=np.float64) - 0.5) / n
    y = np.asarray(abs_gauss_tail_quantile(tails), dtype=np.float64)
    y0 = float(abs_gauss_tail_quantile(1.0 / (4.0 * n)))
    return QuantileVector(n=n, y=y, y0=y0)


def quantile_gap_check(q: QuantileVector) -> Tuple[bool, int, Optional[float]]:
    """
    Check y_1^2 - y_i^2 >= log i for every i <= 0.317 n.

    Returns:
        Tuple[bool, int, Optional[float]]: (holds, largest i checked, smallest margin)
    """
    i_max = int(math.floor(QUANTILE_GAP_FRACTION * q.n))
    if i_max < 1:
        return True, 0, None
    i = np.arange(1, i_max + 1, dtype=np.float64)
    y = q.y[:i_max]
    margin = (q.y[0] ** 2 - y * y) - np.log(i)
    worst = float(np.min(margin))
    return bool(worst >= 0.0), i_max, worst


def top_order_interval_probability(n: int) -> float:
    """Exact P(x_1* in [y_1, y_0]) = (1 - 1/(4n))^n - (1 - 1/(2n))^n."""
    require(n >= 1, f"top_order_interval_probability requires n >= 1, got {n}")
    return math.exp(n * math.log1p(-0.25 / n)) - math.exp(n * math.log1p(-0.5 / n))


def anticoncentration_bound(n: int, eps: float) -> float:
    """1 - 0.07 n^{-120 eps}."""
    require(n >= 2, f"anticoncentration_bound requires n >= 2, got {n}")
    require(eps > 0, f"anticoncentration_bound requires eps > 0, got {eps}")
    return 1.0 - 0.07 * math.exp(-120.0 * eps * math.log(n))


@dataclass(frozen=True)
class DudleySchedule:
    """
    Chaining schedule with scales delta_j = e^{-j} and weights t_j.

    Attributes:
        p: Norm index
        k: Subspace dimension used for the net cardinality bounds
        deltas: delta_1..delta_jmax
        weights: t_1..t_jmax
        log_cardinality: k log(3 e^j) for each level
        s_p: Normalising sum of j^{p/2} e^{-j}
        tail_mass: 1 - sum of the listed weights
    """

    p: float
    k: int
    deltas: np.ndarray
    weights: np.ndarray
    log_cardinality: np.ndarray
    s_p: float
    tail_mass: float


def dudley_sum(p: float) -> float:
    """s_p = sum_{j>=1} j^{p/2} e^{-j} to relative error 1e-12."""
    half = p / 2.0
    total = 0.0
    j = 1
    while True:
        term = math.exp(half * math.log(j) - j)
        total += term
        if j >= p and term <= DUDLEY_SUM_RTOL * total * (1.0 - math.exp(-0.5)):
            return total
        j += 1


def dudley_fernique_schedule(p: float, j_max: int, k: int = 1) -> DudleySchedule:
    """
    Chaining schedule delta_j = e^{-j}, t_j = j^{p/2} e^{-j} / s_p.

    Args:
        p: Finite p > 2
        j_max: Number of levels listed
        k: Dimension entering |N_j| <= (3/delta_j)^k

    Returns:
        DudleySchedule: Levels 1..j_max
    """
    require(2.0 < p < math.inf, f"dudley_fernique_schedule requires 2 < p < inf, got {p}")
    require(j_max >= 1, f"j_max must be at least 1, got {j_max}")
    require(k >= 1, f"k must be at least 1, got {k}")
    s_p = dudley_sum(p)
    j = np.arange(1, j_max + 1, dtype=np.float64)
    weights = np.exp(0.5 * p * np.log(j) - j) / s_p
    return DudleySchedule(
        p=p,
        k=k,
        deltas=np.exp(-j),
        weights=weights,
        log_cardinality=k * (math.log(3.0) + j),
        s_p=s_p,
        tail_mass=max(0.0, 1.0 - float(np.sum(weights))),
    )


def lipschitz_constant(n: int, p: PLike) -> float:
    """Lipschitz constant of ||.||_p with respect to l_2: max{n^{1/p-1/2}, 1}."""
    require(n >= 1, f"lipschitz_constant requires n >= 1, got {n}")
    p = as_exponent(p)
    return max(n ** (1.0 / p - 0.5), 1.0)


def gaussian_envelope(t: float, lipschitz: float) -> float:
    """Universal bound min{1, 2 exp(-t^2 / (2 pi^2 L^2))} on P(|f - Ef| > t)."""
    require(lipschitz > 0, f"lipschitz constant must be positive, got {lipschitz}")
    return min(1.0, 2.0 * math.exp(-t * t / (2.0 * math.pi ** 2 * lipschitz ** 2)))


def polynomial_tail_bound(n: int, p: PLike, eps: float,
                          constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """Bound C / (1 + c p^2 2^{-p} eps^2 n), valid for every eps > 0 when p <= c0 log n."""
    require(n >= 2, f"polynomial_tail_bound requires n >= 2, got {n}")
    require(eps > 0, f"polynomial_tail_bound requires eps > 0, got {eps}")
    p = as_exponent(p)
    consts = _constants(constants)
    require(p <= consts.c0 * math.log(n), "polynomial_tail_bound requires p <= c0 log n")
    value = consts.big_c / (1.0 + consts.small_c * p * p * 2.0 ** (-p) * eps * eps * n)
    return _prediction("polynomial-tail", min(1.0, value), "p <= c0 log n", consts)


def weak_concentration_exponent(n: int, p: PLike, eps: float,
                                side: TailSide = TailSide.TWO_SIDED,
                                constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """
    Exponent of the weak concentration bound for 4 <= p <= c0 log n:
    eps^{1+1/p} k_{p,n} two-sided, eps k_{p,n} for the lower tail.
    """
    _check_eps(eps)
    p = as_exponent(p)
    consts = _constants(constants)
    require(4.0 <= p <= consts.c0 * math.log(n),
            "weak_concentration_exponent requires 4 <= p <= c0 log n")
    k_pn = critical_dimension(n, p, consts).value
    if TailSide(side) == TailSide.LOWER:
        return _prediction("weak-concentration", eps * k_pn, "lower tail", consts)
    return _prediction("weak-concentration", eps ** (1.0 + 1.0 / p) * k_pn, "two-sided", consts)


def large_p_concentration_exponent(n: int, eps: float,
                                   constants: Optional[TheoryConstants] = None) -> TheoryPrediction:
    """Exponent eps log n governing the norm's deviations once p exceeds c0 log n."""
    require(n >= 2, f"large_p_concentration_exponent requires n >= 2, got {n}")
    _check_eps(eps)
    return _prediction("large-p-concentration", eps * math.log(n), "p > c0 log n",
                       _constants(constants))


def moment_stability_bound(n: int, p: PLike, r: float, s: float, gate: float) -> float:
    """Calibration gate gate * (2s - r) / (k_{p,n} log n) for I_s / I_r - 1."""
    require(n >= 2, f"moment_stability_bound requires n >= 2, got {n}")
    k_pn = critical_dimension(n, p).value
    return gate * (2.0 * s - r) / (k_pn * math.log(n))


def pair_moment_envelope(n: int, p: float, r: float) -> float:
    """sigma_p^p max{2^{p/2} (rn)^{1/2}, r^{p/2} n^{1/r}}, the order of (E| ||X||_p^p - ||Y||_p^p |^r)^{1/r}."""
    require(n >= 1 and r >= 1, f"pair_moment_envelope requires n >= 1 and r >= 1, got n={n}, r={r}")
    require(1.0 <= p < math.inf, f"pair_moment_envelope requires finite p >= 1, got {p}")
    log_first = 0.5 * p * math.log(2.0) + 0.5 * math.log(r * n)
    log_second = 0.5 * p * math.log(r) + math.log(n) / r
    return math.exp(log_sigma_power(p) + max(log_first, log_second))


def pair_moment_second(n: int, p: float) -> float:
    """Exact (E(||X||_p^p - ||Y||_p^p)^2)^{1/2} = sqrt(2n (sigma_{2p}^{2p} - sigma_p^{2p}))."""
    require(n >= 1, f"pair_moment_second requires n >= 1, got {n}")
    require(1.0 <= p < math.inf, f"pair_moment_second requires finite p >= 1, got {p}")
    log_sp = log_sigma_power(p)
    gap = log_sigma_power(2.0 * p) - 2.0 * log_sp
    return math.sqrt(2.0 * n * math.exp(2.0 * log_sp) * -math.expm1(-gap) * math.exp(gap))
