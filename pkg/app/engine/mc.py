"""
Monte Carlo estimators for the distributional claims about ||X||_p.

Every estimator cuts its samples into chunks (see app.core.parallel). Chunk
c of an experiment draws from the stream keyed by (seed, experiment label,
c), so results do not depend on the number of workers.
"""

import logging
import math
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.exceptions import DomainError, require
from app.core.gauss import (
    MomentAccumulator,
    RngStream,
    as_exponent,
    lp_norms,
    merge_all,
    sorted_abs_desc,
)
from app.core.parallel import Chunk, plan_chunks, run_ordered
from app.engine.fitting import fit_line
from app.engine.quadrature import expected_max_abs
from app.engine.theory import (
    anticoncentration_bound,
    gaussian_envelope,
    lipschitz_constant,
    log_sigma_power,
    quantile_vector,
)
from app.schemas.estimates import (
    AnticoncReport,
    Centering,
    CIMethod,
    EstimateWithCI,
    MomentProfile,
    MomentRow,
    MomentSummary,
    SuperconcentrationRow,
    TailCurve,
    TailRow,
    TailSide,
    TailStatistic,
    TopOrderRow,
)

logger = logging.getLogger(__name__)

MIN_MOMENT_SAMPLES = 100
MIN_PAIR_SAMPLES = 10_000
MAX_TAIL_EPS = 10.0
PNORM_FACTOR = 3.0 * math.e ** 2
SHIFT_FACTOR = 60.0
GAP_FACTOR = 2.0
DEFAULT_TOP_ORDERS = (3, 4, 5, 6, 7, 8)


def _z(ci_z: Optional[float]) -> float:
    return settings.CI_Z if ci_z is None else ci_z


def _workers(workers: Optional[int]) -> int:
    return settings.DEFAULT_WORKERS if workers is None else workers


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else repr(float(p))


def normal_estimate(value: float, std_error: float, count: int, ci_z: Optional[float] = None,
                    unstable: bool = False) -> EstimateWithCI:
    """Point estimate with the normal interval value +- z * SE."""
    z = _z(ci_z)
    se = max(float(std_error), 0.0) if math.isfinite(std_error) else math.inf
    half = z * se
    return EstimateWithCI(
        value=float(value),
        std_error=se,
        ci_low=float(value) - half,
        ci_high=float(value) + half,
        sample_count=int(count),
        ci_method=CIMethod.NORMAL,
        unstable=unstable,
    )


def wilson_estimate(hits: int, total: int, ci_z: Optional[float] = None) -> EstimateWithCI:
    """
    Binomial proportion with its Wilson score interval.

    A zero-hit proportion is flagged ``upper_bound_only``.

    Args:
        hits: Successes
        total: Trials, at least 1
        ci_z: Normal quantile of the interval

    Returns:
        EstimateWithCI: Proportion, binomial standard error and Wilson interval
    """
    require(total >= 1, "a proportion needs at least one trial")
    require(0 <= hits <= total, f"hits must lie in [0, {total}], got {hits}")
    z = _z(ci_z)
    phat = hits / total
    z2n = z * z / total
    denom = 1.0 + z2n
    centre = (phat + 0.5 * z2n) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z2n / (4.0 * total)) / denom
    return EstimateWithCI(
        value=phat,
        std_error=math.sqrt(phat * (1.0 - phat) / total),
        ci_low=min(max(0.0, centre - half), phat),
        ci_high=max(min(1.0, centre + half), phat),
        sample_count=total,
        ci_method=CIMethod.WILSON,
        upper_bound_only=hits == 0,
    )


def _statistic_chunk(chunk: Chunk, seed: int, label: str, n: int, p: float,
                     statistic: str) -> np.ndarray:
    x = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, n))
    norms = lp_norms(x, p)
    if statistic == TailStatistic.EUCLIDEAN_RATIO:
        return norms / lp_norms(x, 2.0)
    return norms


def sample_statistic(n: int, p: float, samples: int, seed: int, label: str,
                     workers: Optional[int] = None,
                     statistic: TailStatistic = TailStatistic.NORM) -> List[np.ndarray]:
    """
    Sample ||X||_p (or ||X||_p / ||X||_2) for ``samples`` independent X ~ N(0, I_n).

    Returns:
        List[np.ndarray]: Per-chunk values in chunk order
    """
    require(n >= 1, f"dimension must be at least 1, got {n}")
    require(samples >= 1, f"sample count must be at least 1, got {samples}")
    chunks = plan_chunks(samples, n)
    logger.debug(f"Sampling {label}: {samples} vectors of dimension {n} in {len(chunks)} chunks")
    fn = partial(_statistic_chunk, seed=seed, label=label, n=n, p=p,
                 statistic=TailStatistic(statistic).value)
    return run_ordered(fn, chunks, _workers(workers))


def moment_profile(norms: np.ndarray, n: int, p: float, r_grid: Sequence[float],
                   ci_z: Optional[float] = None) -> MomentProfile:
    """
    I_r = (E||X||_p^r)^{1/r} for each r, with I_0 the geometric mean.

    Powers are averaged as exp(r (log ||X|| - L)) with L the mean log-norm,
    so neither large nor negative r overflows. Orders r <= -n/4 are
    flagged unstable.
    """
    values = np.asarray(norms, dtype=np.float64)
    count = values.size
    logs = np.log(values)
    centre = float(np.mean(logs))
    rows = []
    for r in r_grid:
        require(r > -n, f"moment order must satisfy r > -n, got r={r}, n={n}")
        unstable = r <= -n / 4.0
        if unstable:
            logger.warning(f"Negative moment r={r} is unstable for n={n}; estimate flagged")
        if r == 0:
            value = math.exp(centre)
            se = value * float(np.std(logs, ddof=1)) / math.sqrt(count)
        else:
            weights = np.exp(r * (logs - centre))
            mean_w = float(np.mean(weights))
            value = math.exp(centre) * mean_w ** (1.0 / r)
            se = value * float(np.std(weights, ddof=1)) / (math.sqrt(count) * abs(r) * mean_w)
        rows.append(MomentRow(r=float(r), estimate=normal_estimate(value, se, count, ci_z, unstable)))
    return MomentProfile(n=n, p=p, samples=count, rows=rows)


def summarize(accumulator: MomentAccumulator, ci_z: Optional[float] = None) -> MomentSummary:
    """Mean and variance estimates from an accumulator."""
    count = accumulator.count
    kurtosis = accumulator.standardized_moment4 if accumulator.m2 > 0 else None
    return MomentSummary(
        mean=normal_estimate(accumulator.mean, accumulator.mean_std_error, count, ci_z),
        variance=normal_estimate(accumulator.variance, accumulator.variance_std_error, count, ci_z),
        standardized_moment4=kurtosis,
    )


def estimate_norm_moments(n: int, p, samples: int, seed: int,
                          r_grid: Sequence[float] = (),
                          workers: Optional[int] = None,
                          ci_z: Optional[float] = None) -> Tuple[MomentSummary, MomentProfile]:
    """
    Mean, variance and the moment profile of ||X||_p.

    Args:
        n: Dimension
        p: Norm index (number or 'inf')
        samples: Number of Gaussian vectors, at least 100
        seed: Experiment seed
        r_grid: Moment orders r > -n (0 gives the geometric mean)
        workers: Worker processes
        ci_z: Normal quantile for intervals

    Returns:
        Tuple[MomentSummary, MomentProfile]: Summary statistics and I_r rows

    Raises:
        DomainError: If samples < 100 or some r <= -n
    """
    p = as_exponent(p)
    require(samples >= MIN_MOMENT_SAMPLES, f"estimate_norm_moments requires N >= {MIN_MOMENT_SAMPLES}, got {samples}")
    for r in r_grid:
        require(r > -n, f"moment order must satisfy r > -n, got r={r}, n={n}")
    chunks = sample_statistic(n, p, samples, seed, f"moments:{n}:{_p_label(p)}", workers)
    accumulator = merge_all(MomentAccumulator.from_values(chunk) for chunk in chunks)
    profile = moment_profile(np.concatenate(chunks), n, p, r_grid, ci_z)
    return summarize(accumulator, ci_z), profile


def _theory_center(n: int, p: float) -> float:
    if p == 1.0:
        return n * math.sqrt(2.0 / math.pi)
    if p == 2.0:
        return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0))
    if math.isinf(p):
        return expected_max_abs(n)
    raise DomainError(f"theory_mean centering is available for p in {{1, 2, inf}}, got p={p}")


def theory_center(n: int, p: float, statistic: TailStatistic = TailStatistic.NORM) -> float:
    """Closed-form centre E||X||_p (or the ratio of means for the Euclidean ratio)."""
    p = as_exponent(p)
    if TailStatistic(statistic) == TailStatistic.EUCLIDEAN_RATIO:
        return _theory_center(n, p) / _theory_center(n, 2.0)
    return _theory_center(n, p)


def count_exceedances(deviation: np.ndarray, eps_grid: Sequence[float]) -> List[int]:
    """Number of entries strictly above each eps."""
    ordered = np.sort(np.asarray(deviation, dtype=np.float64))
    total = ordered.size
    return [int(total - np.searchsorted(ordered, eps, side="right")) for eps in eps_grid]


def tail_curve(n: int, p, eps_grid: Sequence[float], samples: int, seed: int,
               centering: Centering = Centering.EMPIRICAL_MEAN,
               statistic: TailStatistic = TailStatistic.NORM,
               side: TailSide = TailSide.TWO_SIDED,
               workers: Optional[int] = None,
               ci_z: Optional[float] = None) -> TailCurve:
    """
    Empirical P(|S - m| > eps m) over an eps grid.

    S is ||X||_p or ||X||_p / ||X||_2; m is the empirical mean of an
    independent pilot sample or the closed-form mean. Zero-hit rows carry
    only an upper bound.

    Args:
        n: Dimension
        p: Norm index
        eps_grid: Relative deviations in [0, 10]
        samples: Number of Gaussian vectors
        seed: Experiment seed
        centering: Source of the centre m
        statistic: Norm or Euclidean ratio
        side: Two-sided, lower or upper deviations
        workers: Worker processes
        ci_z: Normal quantile for Wilson intervals

    Returns:
        TailCurve: One row per eps
    """
    p = as_exponent(p)
    require(len(eps_grid) > 0, "eps grid must not be empty")
    for eps in eps_grid:
        require(0.0 <= eps <= MAX_TAIL_EPS, f"tail eps must lie in [0, {MAX_TAIL_EPS:g}], got {eps}")
    statistic = TailStatistic(statistic)
    side = TailSide(side)
    centering = Centering(centering)
    label = f"tails:{statistic.value}:{n}:{_p_label(p)}"
    values = np.concatenate(sample_statistic(n, p, samples, seed, label, workers, statistic))
    if centering == Centering.EMPIRICAL_MEAN:
        pilot = np.concatenate(sample_statistic(n, p, samples, seed, label + ":pilot", workers, statistic))
        center = float(np.mean(pilot))
    else:
        center = theory_center(n, p, statistic)

    relative = (values - center) / center
    if side == TailSide.TWO_SIDED:
        deviation = np.abs(relative)
    elif side == TailSide.LOWER:
        deviation = -relative
    else:
        deviation = relative
    hits = count_exceedances(deviation, eps_grid)

    lipschitz = lipschitz_constant(n, p) if statistic == TailStatistic.NORM else None
    rows = []
    for eps, count in zip(eps_grid, hits):
        if count == 0:
            logger.warning(f"No exceedances at eps={eps} (n={n}, p={_p_label(p)}); reporting an upper bound")
        envelope = gaussian_envelope(eps * center, lipschitz) if lipschitz is not None else None
        rows.append(TailRow(eps=float(eps), prob=wilson_estimate(count, samples, ci_z),
                            hits=count, envelope=envelope))
    return TailCurve(n=n, p=p, samples=samples, seed=seed, centering=centering,
                     statistic=statistic, side=side, center=center, rows=rows)


def levy_concentration(samples: np.ndarray, t: float, ci_z: Optional[float] = None) -> EstimateWithCI:
    """
    Empirical Levy concentration function sup_lambda P(|eta - lambda| <= t).

    For each sample s_i the window [s_i, s_i + 2t] is counted with a binary
    search on the sorted array; the fullest window gives the estimate.

    Args:
        samples: Sorted, non-empty sample
        t: Half-width t >= 0

    Returns:
        EstimateWithCI: Fraction in the best window with its Wilson interval
    """
    values = np.asarray(samples, dtype=np.float64)
    require(values.size > 0, "levy_concentration needs a non-empty sample")
    require(t >= 0, f"levy_concentration requires t >= 0, got {t}")
    require(bool(np.all(np.diff(values) >= 0)), "levy_concentration needs sorted samples")
    counts = np.searchsorted(values, values + 2.0 * t, side="right") - np.arange(values.size)
    return wilson_estimate(int(np.max(counts)), int(values.size), ci_z)


def _pair_chunk(chunk: Chunk, seed: int, label: str, n: int, p: float, log_scale: float) -> np.ndarray:
    block = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, 2 * n))
    log_x = p * np.log(lp_norms(block[:, :n], p)) - log_scale
    log_y = p * np.log(lp_norms(block[:, n:], p)) - log_scale
    return np.exp(log_x) - np.exp(log_y)


def pair_power_moment_mc(n: int, p: float, r: float, samples: int, seed: int,
                         workers: Optional[int] = None,
                         ci_z: Optional[float] = None) -> EstimateWithCI:
    """
    (E| ||X||_p^p - ||Y||_p^p |^r)^{1/r} from independent pairs.

    Differences are scaled by sigma_p^p sqrt(n) before raising to r.
    """
    p = as_exponent(p)
    require(math.isfinite(p), "pair_power_moment_mc requires finite p")
    require(r >= 1, f"pair_power_moment_mc requires r >= 1, got {r}")
    require(samples >= MIN_PAIR_SAMPLES, f"pair_power_moment_mc requires N >= {MIN_PAIR_SAMPLES}, got {samples}")
    log_scale = log_sigma_power(p) + 0.5 * math.log(n)
    label = f"pairs:{n}:{_p_label(p)}"
    chunks = plan_chunks(samples, 2 * n)
    fn = partial(_pair_chunk, seed=seed, label=label, n=n, p=p, log_scale=log_scale)
    diffs = np.concatenate(run_ordered(fn, chunks, _workers(workers)))
    powers = np.abs(diffs) ** r
    mean_power = float(np.mean(powers))
    value = math.exp(log_scale) * mean_power ** (1.0 / r)
    se = value * float(np.std(powers, ddof=1)) / (math.sqrt(samples) * r * mean_power)
    return normal_estimate(value, se, samples, ci_z)


def _anticonc_chunk(chunk: Chunk, seed: int, label: str, n: int, p: float,
                    thresholds: np.ndarray, y1: float, y0: float,
                    orders: Tuple[int, ...], shift: float, gap: float) -> dict:
    x = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, n))
    z = sorted_abs_desc(x)
    top = z[:, 0]
    in_range = (top >= y1) & (top <= y0)
    q1 = in_range & np.all(z <= thresholds, axis=1)
    norms = lp_norms(z, p)
    result = {
        "in_range": int(np.sum(in_range)),
        "q1": int(np.sum(q1)),
        "orders": [int(np.sum(z[:, i - 1] >= thresholds[i - 1])) for i in orders],
        "pnorm_violations": 0,
        "distance_violations": 0,
        "norms": norms,
    }
    members = z[q1]
    if members.shape[0]:
        ratio_mass = np.sum(np.power(members / members[:, :1], p), axis=1)
        result["pnorm_violations"] = int(np.sum(ratio_mass > PNORM_FACTOR))
        moved = members.copy()
        moved[:, 0] += shift
        gain = lp_norms(moved, p) - norms[q1]
        result["distance_violations"] = int(np.sum(gain <= gap))
    return result


def anticoncentration_experiment(n: int, p, eps: float, samples: int, seed: int,
                                 orders: Sequence[int] = DEFAULT_TOP_ORDERS,
                                 workers: Optional[int] = None,
                                 ci_z: Optional[float] = None) -> AnticoncReport:
    """
    Anti-concentration of ||X||_p for p >= 12 log n.

    For every sample the rearrangement z = |X|* is tested for membership in
    Q1 = {y_1 <= z_1 <= y_0, z_i <= y_{floor(i/e^2)} for all i} (with
    y_{floor(i/e^2)} = y_0 for i < e^2). On Q1 the deterministic facts
    ||z||_p^p <= 3e^2 z_1^p and ||Tz||_p - ||z||_p > 2 eps sqrt(log n) are
    checked, where T adds 60 eps sqrt(log n) to the largest coordinate.

    Args:
        n: Dimension
        p: Norm index, at least 12 log n
        eps: Scale in (0, 1]
        samples: Number of Gaussian vectors
        seed: Experiment seed
        orders: Indices i for the rows P(z_i >= y_{floor(i/e^2)})

    Returns:
        AnticoncReport: Probabilities, exact violation counters and the Levy estimate

    Raises:
        DomainError: If p < 12 log n, eps is outside (0, 1] or an index exceeds n
    """
    p = as_exponent(p)
    log_n = math.log(n) if n >= 2 else 0.0
    require(n >= 2, f"anticoncentration_experiment requires n >= 2, got {n}")
    require(math.isfinite(p), "anticoncentration_experiment requires finite p")
    require(p >= 12.0 * log_n, f"anticoncentration_experiment requires p >= 12 log n = {12.0 * log_n:.4g}, got {p}")
    require(0 < eps <= 1, f"anticoncentration_experiment requires 0 < eps <= 1, got {eps}")
    require(samples >= 1, f"sample count must be at least 1, got {samples}")
    orders = tuple(int(i) for i in orders)
    require(all(1 <= i <= n for i in orders), f"top-order indices must lie in [1, {n}], got {orders}")

    quantiles = quantile_vector(n)
    scale = math.sqrt(log_n)
    label = f"anticonc:{n}:{_p_label(p)}:{eps!r}"
    fn = partial(
        _anticonc_chunk, seed=seed, label=label, n=n, p=p,
        thresholds=quantiles.thresholds(), y1=quantiles.level(1), y0=quantiles.y0,
        orders=orders, shift=SHIFT_FACTOR * eps * scale, gap=GAP_FACTOR * eps * scale,
    )
    parts = run_ordered(fn, plan_chunks(samples, n), _workers(workers))

    q1_count = sum(part["q1"] for part in parts)
    pnorm_violations = sum(part["pnorm_violations"] for part in parts)
    distance_violations = sum(part["distance_violations"] for part in parts)
    if pnorm_violations or distance_violations:
        logger.warning(f"Anti-concentration checks failed: {pnorm_violations} p-norm and "
                       f"{distance_violations} distance violations over {q1_count} Q1 samples")
    order_rows = [
        TopOrderRow(
            index=i,
            estimate=wilson_estimate(sum(part["orders"][j] for part in parts), samples, ci_z),
            bound=math.exp(-i),
        )
        for j, i in enumerate(orders)
    ]
    norms = np.sort(np.concatenate([part["norms"] for part in parts]))
    return AnticoncReport(
        n=n,
        p=p,
        eps=eps,
        samples=samples,
        prob_q1=wilson_estimate(q1_count, samples, ci_z),
        prob_top_in_range=wilson_estimate(sum(part["in_range"] for part in parts), samples, ci_z),
        top_order_tail=order_rows,
        q1_count=q1_count,
        pnorm_violations=pnorm_violations,
        distance_violations=distance_violations,
        levy_q=levy_concentration(norms, eps * scale, ci_z),
        bound=anticoncentration_bound(n, eps),
    )


def reverse_concentration_check(n: int, p, eps_grid: Sequence[float], samples: int, seed: int,
                                side: TailSide = TailSide.TWO_SIDED,
                                workers: Optional[int] = None,
                                ci_z: Optional[float] = None) -> TailCurve:
    """
    Tail curve for p >= (log n)^2 with the slope of log prob against eps log n.

    The slope is fitted over rows with eps > 0 and at least one hit; it is
    left empty when fewer than three such rows exist.
    """
    p = as_exponent(p)
    require(n >= 2, f"reverse_concentration_check requires n >= 2, got {n}")
    log_n = math.log(n)
    require(p >= log_n ** 2, f"reverse_concentration_check requires p >= (log n)^2 = {log_n ** 2:.4g}, got {p}")
    curve = tail_curve(n, p, eps_grid, samples, seed, side=side, workers=workers, ci_z=ci_z)
    usable = [row for row in curve.rows if row.eps > 0 and row.hits > 0]
    if len(usable) < 3:
        logger.warning(f"Only {len(usable)} tail rows with hits; no slope fitted")
        return curve
    fit = fit_line(
        np.array([row.eps * log_n for row in usable]),
        np.log([row.prob.value for row in usable]),
        "log prob ~ eps*log n",
    )
    return curve.model_copy(update={"fitted_slope": fit.slope})


def gradient_norm_sq(x: np.ndarray, p: float, norms: Optional[np.ndarray] = None) -> np.ndarray:
    """
    ||grad ||x||_p||_2^2 = sum_i (|x_i| / ||x||_p)^{2p-2} row-wise.

    For p = inf the gradient is a coordinate vector almost everywhere.
    """
    if math.isinf(p):
        return np.ones(x.shape[:-1])
    if norms is None:
        norms = lp_norms(x, p)
    ratio = np.abs(x) / norms[..., None]
    return np.sum(np.power(ratio, 2.0 * p - 2.0), axis=-1)


def _superconc_chunk(chunk: Chunk, seed: int, label: str, n: int, p: float) -> Tuple[np.ndarray, np.ndarray]:
    x = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, n))
    norms = lp_norms(x, p)
    return norms, gradient_norm_sq(x, p, norms)


def superconcentration_profile(n: int, p, samples: int, seed: int,
                               workers: Optional[int] = None,
                               ci_z: Optional[float] = None) -> SuperconcentrationRow:
    """
    Var||X||_p next to the Poincare bound E||grad||X||_p||^2 and the
    Lipschitz bound b^2.
    """
    p = as_exponent(p)
    require(samples >= MIN_MOMENT_SAMPLES, f"superconcentration_profile requires N >= {MIN_MOMENT_SAMPLES}, got {samples}")
    fn = partial(_superconc_chunk, seed=seed, label=f"superconc:{n}:{_p_label(p)}", n=n, p=p)
    parts = run_ordered(fn, plan_chunks(samples, n), _workers(workers))
    norms = merge_all(MomentAccumulator.from_values(part[0]) for part in parts)
    gradients = merge_all(MomentAccumulator.from_values(part[1]) for part in parts)
    return SuperconcentrationRow(
        n=n,
        p=p,
        variance=normal_estimate(norms.variance, norms.variance_std_error, samples, ci_z),
        poincare=normal_estimate(gradients.mean, gradients.mean_std_error, samples, ci_z),
        lipschitz=lipschitz_constant(n, p) ** 2,
    )
