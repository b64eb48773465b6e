"""
Random almost-Euclidean sections of B_p^n.

A random k-dimensional subspace is the range of an n x k Gaussian matrix G.
Its distortion is max R / min R over the sphere, where
R(theta) = ||G theta||_p / ||G theta||_2. Extremes come either from a
delta-net with certified brackets (k <= 4) or from the multi-start sphere
optimizer.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.core.exceptions import DomainError, EvaluationError, require
from app.core.gauss import RngStream, as_exponent, derive_stream_id, lp_norms
from app.core.parallel import Chunk, plan_chunks, run_ordered
from app.engine.mc import gradient_norm_sq, normal_estimate, wilson_estimate
from app.engine.nets import check_net_budget, random_sphere_points, sphere_net
from app.engine.optimize import sphere_optimize
from app.engine.theory import sigma
from app.schemas.estimates import EstimateWithCI
from app.schemas.sections import (
    Bracket,
    DistortionReport,
    ProcessCheck,
    SolverMethod,
    SuccessCurve,
    SuccessRow,
)

logger = logging.getLogger(__name__)

INSTANCES_PER_TASK = 8
UNIT_TOLERANCE = 1e-9
BRACKET_NOTE = (
    "A = max_net ||Gu||_p / (1 - delta); "
    "max R <= max_u min(A, ||Gu||_p + delta A) / max(s_min, ||Gu||_2 - delta s_max); "
    "min R >= min_u max(f_min, ||Gu||_p - delta A) / min(s_max, ||Gu||_2 + delta s_max); "
    "s_max, s_min are the extreme singular values of G"
)


@dataclass(frozen=True)
class GaussianMatrix:
    """
    An n x k matrix with i.i.d. standard normal entries.

    Attributes:
        n: Rows (ambient dimension)
        k: Columns (section dimension)
        entries: The matrix
    """

    n: int
    k: int
    entries: np.ndarray

    @classmethod
    def from_array(cls, entries: np.ndarray) -> "GaussianMatrix":
        """Wrap an explicit matrix (e.g. an identity block)."""
        arr = np.asarray(entries, dtype=np.float64)
        require(arr.ndim == 2 and 1 <= arr.shape[1] <= arr.shape[0],
                f"matrix must be n x k with 1 <= k <= n, got shape {arr.shape}")
        return cls(n=arr.shape[0], k=arr.shape[1], entries=arr)

    def scaled(self, factor: float) -> "GaussianMatrix":
        return GaussianMatrix(self.n, self.k, self.entries * factor)


def sample_gaussian_matrix(stream: RngStream, n: int, k: int) -> GaussianMatrix:
    """
    Draw an n x k Gaussian matrix; its range is a rotation-invariant random subspace.

    Raises:
        DomainError: Unless 1 <= k <= n
    """
    require(1 <= k <= n, f"sample_gaussian_matrix requires 1 <= k <= n, got n={n}, k={k}")
    return GaussianMatrix(n=n, k=k, entries=stream.normal((n, k)))


def distortion_functional(G: GaussianMatrix, p, theta: Sequence[float]) -> float:
    """
    R(theta) = ||G theta||_p / ||G theta||_2 (scale invariant in theta).

    Raises:
        DomainError: If theta is zero or has the wrong length
        EvaluationError: If G theta = 0
    """
    p = as_exponent(p)
    vec = np.asarray(theta, dtype=np.float64).ravel()
    require(vec.size == G.k, f"theta must have length {G.k}, got {vec.size}")
    scale = float(np.linalg.norm(vec))
    require(scale > 0, "theta must be non-zero")
    x = G.entries @ (vec / scale)
    euclid = float(lp_norms(x, 2.0))
    if euclid == 0.0:
        raise EvaluationError("G theta = 0; the distortion functional is undefined")
    return float(lp_norms(x, p)) / euclid


def _ratio_bounds(n: int, p: float) -> Tuple[float, float]:
    """Global bounds of ||x||_p / ||x||_2 on R^n."""
    factor = n ** (1.0 / p - 0.5)
    return min(1.0, factor), max(1.0, factor)


def _constant_report(G: GaussianMatrix, p: float, method: SolverMethod, tolerance: float) -> DistortionReport:
    value = distortion_functional(G, p, [1.0])
    bracket = Bracket(lower=value, upper=value)
    return DistortionReport(
        max_ratio=value, min_ratio=value, distortion=1.0, method=method,
        max_bracket=bracket if method == SolverMethod.NET else None,
        min_bracket=bracket if method == SolverMethod.NET else None,
        tolerance=tolerance,
    )


def distortion_net(G: GaussianMatrix, p, delta: float, seed: Optional[int] = None) -> DistortionReport:
    """
    Distortion from a delta-net with certified brackets.

    Args:
        G: Matrix whose range is examined
        p: Norm index
        delta: Net radius
        seed: Seed of the packing (defaults to DEFAULT_SEED)

    Returns:
        DistortionReport: Net extremes, brackets for the true extremes and
        the local-variation constant A / min_net ||Gu||_2

    Raises:
        BudgetExceededError: If k > 4 or (3/delta)^k exceeds the budget
    """
    p = as_exponent(p)
    check_net_budget(G.k, delta)
    if G.k == 1:
        return _constant_report(G, p, SolverMethod.NET, delta)
    net = sphere_net(G.k, delta, seed)
    x = net.points @ G.entries.T
    f = lp_norms(x, p)
    g = lp_norms(x, 2.0)
    ratios = f / g
    singular = np.linalg.svd(G.entries, compute_uv=False)
    s_max, s_min = float(singular[0]), float(singular[-1])
    lo_global, hi_global = _ratio_bounds(G.n, p)

    a_up = float(np.max(f)) / (1.0 - delta)
    upper_max = float(np.max(np.minimum(f + delta * a_up, a_up) / np.maximum(g - delta * s_max, s_min)))
    f_floor = s_min * lo_global
    lower_min = float(np.min(np.maximum(f - delta * a_up, f_floor) / np.minimum(g + delta * s_max, s_max)))

    net_max, net_min = float(np.max(ratios)), float(np.min(ratios))
    upper_max = max(min(upper_max, hi_global), net_max)
    lower_min = min(max(lower_min, lo_global), net_min)
    logger.debug(f"Net of {net.size} points: max R in [{net_max:.6g}, {upper_max:.6g}], "
                 f"min R in [{lower_min:.6g}, {net_min:.6g}]")
    return DistortionReport(
        max_ratio=net_max,
        min_ratio=net_min,
        distortion=max(1.0, net_max / net_min),
        method=SolverMethod.NET,
        max_bracket=Bracket(lower=net_max, upper=upper_max),
        min_bracket=Bracket(lower=lower_min, upper=net_min),
        tolerance=delta,
        net_size=net.size,
        local_variation=a_up / float(np.min(g)),
        bracket_note=BRACKET_NOTE,
    )


def log_ratio_objective(G: GaussianMatrix, p: float):
    """
    Batch objective log ||G theta||_p - log ||G theta||_2 and its gradient.

    The gradient of ||x||_p is sgn(x_i) |x_i|^{p-1} / ||x||_p^{p-1}.
    """
    entries = G.entries

    def objective(theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = theta @ entries.T
        f = lp_norms(x, p)
        g = lp_norms(x, 2.0)
        if np.any(g == 0.0):
            raise EvaluationError("G theta = 0 during optimization")
        weights = np.sign(x) * np.power(np.abs(x) / f[:, None], p - 1.0) / f[:, None]
        grad = weights @ entries - (x @ entries) / (g * g)[:, None]
        return np.log(f) - np.log(g), grad

    return objective


def max_leverage_ratio(G: GaussianMatrix) -> float:
    """Exact max of ||x||_inf / ||x||_2 over range(G): the root of the largest leverage score."""
    q, _ = np.linalg.qr(G.entries)
    return float(np.sqrt(np.max(np.sum(q * q, axis=1))))


def optimizer_starts(k: int, restarts: int, stream: RngStream) -> np.ndarray:
    """Uniform random starts followed by the basis vectors and the diagonal."""
    return np.vstack([
        random_sphere_points(stream, restarts, k),
        np.eye(k),
        np.full((1, k), 1.0 / math.sqrt(k)),
    ])


def distortion_opt(G: GaussianMatrix, p, restarts: Optional[int] = None, tol: Optional[float] = None,
                   stream: Optional[RngStream] = None, max_iter: Optional[int] = None) -> DistortionReport:
    """
    Heuristic distortion by multi-start projected gradient on the sphere.

    For p = inf the maximum is exact (largest leverage score) and the
    minimum is searched with the smoothed exponent INFINITY_SMOOTHING_P,
    then re-evaluated with the true maximum norm.

    Args:
        G: Matrix whose range is examined
        p: Norm index
        restarts: Random starts (basis vectors and the diagonal are added)
        tol: Relative-change tolerance
        stream: Source of random starts
        max_iter: Iteration cap per run

    Returns:
        DistortionReport: Best extremes over all starts, ``converged`` false
        when some start hit the iteration cap
    """
    p = as_exponent(p)
    restarts = settings.OPT_RESTARTS if restarts is None else restarts
    tol = settings.OPT_TOL if tol is None else tol
    max_iter = settings.OPT_MAX_ITER if max_iter is None else max_iter
    require(restarts >= 1, f"restarts must be at least 1, got {restarts}")
    if G.k == 1:
        return _constant_report(G, p, SolverMethod.OPTIMIZER, tol)
    if stream is None:
        stream = RngStream(settings.DEFAULT_SEED, derive_stream_id("optimizer-starts", G.n, G.k))
    starts = optimizer_starts(G.k, restarts, stream)

    if math.isinf(p):
        max_ratio = max_leverage_ratio(G)
        smooth = log_ratio_objective(G, settings.INFINITY_SMOOTHING_P)
        low = sphere_optimize(smooth, starts, maximize=False, max_iter=max_iter, tol=tol)
        min_ratio = min(distortion_functional(G, p, low.theta), max_ratio)
        converged = low.converged
    else:
        objective = log_ratio_objective(G, p)
        high = sphere_optimize(objective, starts, maximize=True, max_iter=max_iter, tol=tol)
        low = sphere_optimize(objective, starts, maximize=False, max_iter=max_iter, tol=tol)
        max_ratio = math.exp(high.value)
        min_ratio = math.exp(low.value)
        converged = high.converged and low.converged
    return DistortionReport(
        max_ratio=max_ratio,
        min_ratio=min_ratio,
        distortion=max(1.0, max_ratio / min_ratio),
        method=SolverMethod.OPTIMIZER,
        tolerance=tol,
        restarts_used=int(starts.shape[0]),
        converged=converged,
    )


@dataclass(frozen=True)
class SectionOptions:
    """Solver settings shared by every instance of a section experiment."""

    solver: SolverMethod = SolverMethod.OPTIMIZER
    delta: float = 0.05
    restarts: int = 32
    tol: float = 1e-10
    strict: bool = False

    @property
    def tolerance(self) -> float:
        return self.delta if self.solver == SolverMethod.NET else self.tol


def default_options(solver: SolverMethod = SolverMethod.OPTIMIZER, delta: float = 0.05,
                    restarts: Optional[int] = None, tol: Optional[float] = None,
                    strict: bool = False) -> SectionOptions:
    """Options with settings-backed defaults for restarts and tolerance."""
    return SectionOptions(
        solver=SolverMethod(solver),
        delta=delta,
        restarts=settings.OPT_RESTARTS if restarts is None else restarts,
        tol=settings.OPT_TOL if tol is None else tol,
        strict=strict,
    )


def check_section_feasible(n: int, k: int, p: float, options: SectionOptions) -> None:
    """Validate a section cell before any sampling."""
    require(1 <= k <= n, f"section experiments require 1 <= k <= n, got n={n}, k={k}")
    as_exponent(p)
    if options.solver == SolverMethod.NET:
        check_net_budget(k, options.delta)
    elif options.strict:
        raise DomainError("strict success requires the net solver (k <= 4)")


def _section_label(n: int, k: int, p: float) -> str:
    return f"section:{n}:{k}:{'inf' if math.isinf(p) else repr(float(p))}"


@dataclass(frozen=True)
class DistortionSample:
    """
    Per-instance solver output of one (n, k, p) cell.

    Attributes:
        distortions: Heuristic (net or optimizer) distortions
        certified: Certified upper bounds (NaN unless the net solver is used)
        converged: Whether each optimizer run met its tolerance
    """

    distortions: np.ndarray
    certified: np.ndarray
    converged: np.ndarray

    @property
    def size(self) -> int:
        return int(self.distortions.size)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _section_task(block: Chunk, seed: int, n: int, k: int, p: float,
                  options: SectionOptions) -> List[Tuple[float, float, bool]]:
    label = _section_label(n, k, p)
    out = []
    for index in range(block.start, block.start + block.rows):
        stream = RngStream.for_task(seed, label, index)
        G = sample_gaussian_matrix(stream, n, k)
        if options.solver == SolverMethod.NET:
            report = distortion_net(G, p, options.delta, seed)
            certified = report.certified_distortion_upper
            out.append((report.distortion, math.inf if certified is None else certified, True))
        else:
            report = distortion_opt(G, p, options.restarts, options.tol, stream.substream("starts"))
            if not report.converged:
                logger.warning(f"Instance {index} of {label} did not converge")
            out.append((report.distortion, math.nan, report.converged))
    return out


def sample_distortions(n: int, k: int, p, samples: int, seed: int,
                       options: Optional[SectionOptions] = None,
                       workers: Optional[int] = None) -> DistortionSample:
    """
    Distortions of ``samples`` independent sections.

    Instance i uses the stream keyed by (seed, n, k, p, i) for any eps, so
    success indicators for two eps values are nested sample by sample.

    Returns:
        DistortionSample: Distortions, certified bounds and convergence flags
    """
    p = as_exponent(p)
    options = options or default_options()
    check_section_feasible(n, k, p, options)
    require(samples >= 1, f"sample count must be at least 1, got {samples}")
    blocks = plan_chunks(samples, 1, rows=INSTANCES_PER_TASK)
    fn = partial(_section_task, seed=seed, n=n, k=k, p=p, options=options)
    workers = settings.DEFAULT_WORKERS if workers is None else workers
    logger.debug(f"Solving {samples} sections n={n}, k={k} with the {SolverMethod(options.solver).value} solver")
    triples = [triple for part in run_ordered(fn, blocks, workers) for triple in part]
    return DistortionSample(
        distortions=np.array([t[0] for t in triples], dtype=np.float64),
        certified=np.array([t[1] for t in triples], dtype=np.float64),
        converged=np.array([t[2] for t in triples], dtype=bool),
    )


def success_from_distortions(sample: DistortionSample, eps: float, strict: bool = False,
                             ci_z: Optional[float] = None) -> EstimateWithCI:
    """Fraction of instances with distortion < 1 + eps (certified upper bound when strict)."""
    require(eps > 0, f"eps must be positive, got {eps}")
    values = sample.certified if strict else sample.distortions
    hits = int(np.sum(values < 1.0 + eps))
    estimate = wilson_estimate(hits, sample.size, ci_z)
    if not sample.all_converged:
        return estimate.model_copy(update={"unstable": True})
    return estimate


def section_success_probability(n: int, k: int, p, eps: float, samples: int, seed: int,
                                solver: SolverMethod = SolverMethod.OPTIMIZER,
                                options: Optional[SectionOptions] = None,
                                workers: Optional[int] = None,
                                ci_z: Optional[float] = None) -> EstimateWithCI:
    """
    Probability that a random k-dimensional section is (1+eps)-Euclidean.

    Args:
        n: Ambient dimension
        k: Section dimension
        p: Norm index
        eps: Distortion slack, > 0
        samples: Independent matrices
        seed: Experiment seed
        solver: Net (k <= 4, certified brackets) or optimizer
        options: Solver settings; overrides ``solver`` when given

    Returns:
        EstimateWithCI: Success fraction with its Wilson interval
    """
    options = options or default_options(solver)
    sample = sample_distortions(n, k, p, samples, seed, options, workers)
    return success_from_distortions(sample, eps, options.strict, ci_z)


def section_success_curve(n: int, p, eps: float, k_grid: Sequence[int], samples: int, seed: int,
                          options: Optional[SectionOptions] = None,
                          workers: Optional[int] = None,
                          ci_z: Optional[float] = None) -> SuccessCurve:
    """Success probability for every k in ``k_grid``."""
    p = as_exponent(p)
    options = options or default_options()
    for k in k_grid:
        check_section_feasible(n, k, p, options)
    cells = [(k, sample_distortions(n, k, p, samples, seed, options, workers)) for k in k_grid]
    return curve_from_samples(n, p, eps, cells, seed, options, ci_z)


def curve_from_samples(n: int, p: float, eps: float, cells: Sequence[Tuple[int, DistortionSample]],
                       seed: int, options: SectionOptions,
                       ci_z: Optional[float] = None) -> SuccessCurve:
    """Success curve at ``eps`` from distortions already computed for each k."""
    rows = [SuccessRow(k=k, success=success_from_distortions(sample, eps, options.strict, ci_z))
            for k, sample in cells]
    samples = cells[0][1].size if cells else 0
    return SuccessCurve(n=n, p=p, eps=eps, samples=samples, seed=seed, solver=options.solver,
                        tolerance=options.tolerance, strict=options.strict, rows=rows)


def critical_k(curve: SuccessCurve, target_prob: float) -> int:
    """Largest k whose interval lower end reaches ``target_prob`` (0 if none)."""
    qualifying = [row.k for row in curve.rows if row.success.ci_low >= target_prob]
    return max(qualifying) if qualifying else 0


def empirical_critical_dimension(n: int, p, eps: float, target_prob: float, samples: int, seed: int,
                                 k_grid: Sequence[int],
                                 options: Optional[SectionOptions] = None,
                                 workers: Optional[int] = None,
                                 ci_z: Optional[float] = None) -> Tuple[int, SuccessCurve]:
    """
    Scan ``k_grid`` and report the largest k that is (1+eps)-Euclidean with
    probability at least ``target_prob`` (by the interval's lower end).

    The whole grid is scanned; monotonicity in k is not assumed.

    Raises:
        DomainError: If the grid is not strictly increasing or target_prob is outside (0, 1)
    """
    require(len(k_grid) > 0, "k grid must not be empty")
    require(all(a < b for a, b in zip(k_grid, k_grid[1:])), f"k grid must be increasing, got {list(k_grid)}")
    require(0 < target_prob < 1, f"target probability must lie in (0, 1), got {target_prob}")
    curve = section_success_curve(n, p, eps, k_grid, samples, seed, options, workers, ci_z)
    k_star = critical_k(curve, target_prob)
    if k_star == 0:
        logger.info(f"No k in {list(k_grid)} reaches success probability {target_prob} (n={n}, eps={eps})")
    return k_star, curve


def _process_chunk(chunk: Chunk, seed: int, label: str, n: int, k: int, p: float,
                   a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    G = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, n, k))
    gap = np.abs(lp_norms(G @ a, p) - lp_norms(G @ b, p))
    return gap ** r


def _gradient_chunk(chunk: Chunk, seed: int, label: str, n: int, p: float, r: float) -> np.ndarray:
    w = RngStream.for_task(seed, label, chunk.index).normal((chunk.rows, n))
    return gradient_norm_sq(w, p) ** (0.5 * r)


def _root_moment(powers: np.ndarray, r: float, ci_z: Optional[float]) -> EstimateWithCI:
    count = powers.size
    mean_power = float(np.mean(powers))
    if mean_power == 0.0:
        return normal_estimate(0.0, 0.0, count, ci_z)
    value = mean_power ** (1.0 / r)
    se = value * float(np.std(powers, ddof=1)) / (math.sqrt(count) * r * mean_power)
    return normal_estimate(value, se, count, ci_z)


def schechtman_process_check(n: int, k: int, p, a: Sequence[float], b: Sequence[float], r: float,
                             samples: int, seed: int, workers: Optional[int] = None,
                             ci_z: Optional[float] = None) -> ProcessCheck:
    """
    Compare (E| ||Ga||_p - ||Gb||_p |^r)^{1/r} with
    pi sigma_r ||a - b||_2 (E ||grad ||W||_p||_2^r)^{1/r}.

    The gradient moment is estimated on an independent stream.

    Raises:
        DomainError: If a or b is not a unit vector in R^k or r < 1
    """
    p = as_exponent(p)
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    require(va.size == k and vb.size == k, f"a and b must have length k={k}")
    require(abs(np.linalg.norm(va) - 1.0) <= UNIT_TOLERANCE and abs(np.linalg.norm(vb) - 1.0) <= UNIT_TOLERANCE,
            "a and b must be unit vectors")
    require(r >= 1, f"schechtman_process_check requires r >= 1, got {r}")
    require(1 <= k <= n, f"schechtman_process_check requires 1 <= k <= n, got n={n}, k={k}")
    require(samples >= 2, f"sample count must be at least 2, got {samples}")
    workers = settings.DEFAULT_WORKERS if workers is None else workers
    p_label = "inf" if math.isinf(p) else repr(float(p))

    lhs_fn = partial(_process_chunk, seed=seed, label=f"process:{n}:{k}:{p_label}", n=n, k=k, p=p,
                     a=va, b=vb, r=r)
    lhs_powers = np.concatenate(run_ordered(lhs_fn, plan_chunks(samples, n * k), workers))
    grad_fn = partial(_gradient_chunk, seed=seed, label=f"process-gradient:{n}:{p_label}", n=n, p=p, r=r)
    grad_powers = np.concatenate(run_ordered(grad_fn, plan_chunks(samples, n), workers))

    lhs = _root_moment(lhs_powers, r, ci_z)
    gradient = _root_moment(grad_powers, r, ci_z)
    rhs = math.pi * sigma(r) * float(np.linalg.norm(va - vb)) * gradient.value
    return ProcessCheck(lhs=lhs, rhs=rhs, gradient_moment=gradient, margin=rhs - lhs.value)
