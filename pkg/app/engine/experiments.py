"""
Experiment registry shared by the CLI and the lab service.

Each experiment validates every grid cell of its configuration before any
sampling, then produces a fixed header and string rows. Floats are written
with 17 significant digits so tables round-trip exactly.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import DomainError, require
from app.core.gauss import RngStream
from app.engine import mc, sections, theory
from app.engine.fitting import fit_exponent, table_from_rows
from app.engine.quadrature import PAIR_MOMENT_MAX_PR, pair_moment_quadrature
from app.schemas.estimates import Centering, EstimateWithCI
from app.schemas.experiment import ExperimentConfig, ExperimentKind, ExperimentResult
from app.schemas.sections import SolverMethod
from app.schemas.theory import TheoryConstants

logger = logging.getLogger(__name__)

Rows = List[List[str]]


def format_cell(value) -> str:
    """CSV cell text: '' for missing, 17 significant digits for floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def format_row(values: Sequence) -> List[str]:
    return [format_cell(value) for value in values]


def _constants(config: ExperimentConfig) -> TheoryConstants:
    return TheoryConstants.from_settings(c0=config.c0, big_c=config.big_c, small_c=config.small_c)


def _estimate_cells(estimate: EstimateWithCI) -> List[float]:
    return [estimate.value, estimate.ci_low, estimate.ci_high]


@dataclass(frozen=True)
class Experiment:
    """
    One experiment type.

    Attributes:
        header: Fixed CSV header
        default_samples: Sample count used when the config names none
        check: Validates every grid cell; raises DomainError
        run: Produces rows and the instability flag
    """

    header: Tuple[str, ...]
    default_samples: int
    check: Callable[[ExperimentConfig, int], None]
    run: Callable[[ExperimentConfig, int], Tuple[Rows, bool]]


def _check_dimensions(config: ExperimentConfig, minimum: int) -> None:
    for n in config.n:
        require(n >= minimum, f"{config.experiment} requires n >= {minimum}, got n={n}")


# variance

def _check_variance(config: ExperimentConfig, samples: int) -> None:
    _check_dimensions(config, 3)
    require(samples >= mc.MIN_MOMENT_SAMPLES,
            f"variance requires N >= {mc.MIN_MOMENT_SAMPLES}, got {samples}")


def _run_variance(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    constants = _constants(config)
    rows = []
    for n in config.n:
        for p in config.p:
            summary, _ = mc.estimate_norm_moments(n, p, samples, config.seed,
                                                  workers=config.workers, ci_z=config.ci_z)
            variance = summary.variance.value
            if math.isinf(p):
                a_n = theory.gumbel_location(n)
                compensated = variance * a_n * a_n
                limit = theory.GUMBEL_VARIANCE
                prediction = theory.gumbel_variance_prediction(n, constants).value
            else:
                compensated = variance * n ** (1.0 - 2.0 / p)
                limit = theory.delta_method_variance_limit(p)
                prediction = theory.variance_prediction(n, p, constants).value
            rows.append(format_row([
                n, p, samples, summary.mean.value, summary.mean.std_error,
                variance, summary.variance.std_error, compensated, limit, prediction,
            ]))
    return rows, False


# tails

def _check_tails(config: ExperimentConfig, samples: int) -> None:
    for eps in config.eps:
        require(0.0 <= eps <= mc.MAX_TAIL_EPS, f"tail eps must lie in [0, {mc.MAX_TAIL_EPS:g}], got {eps}")
    if config.centering == Centering.THEORY_MEAN.value:
        for p in config.p:
            require(p in (1.0, 2.0) or math.isinf(p),
                    f"theory_mean centering is available for p in {{1, 2, inf}}, got p={p}")


def _run_tails(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    for n in config.n:
        for p in config.p:
            curve = mc.tail_curve(n, p, config.eps, samples, config.seed,
                                  centering=config.centering, statistic=config.statistic,
                                  side=config.side, workers=config.workers, ci_z=config.ci_z)
            for row in curve.rows:
                rows.append(format_row([row.eps, *_estimate_cells(row.prob), row.hits, samples, n, p,
                                        row.envelope]))
    return rows, False


# moments

def _check_moments(config: ExperimentConfig, samples: int) -> None:
    require(samples >= mc.MIN_MOMENT_SAMPLES,
            f"moments requires N >= {mc.MIN_MOMENT_SAMPLES}, got {samples}")
    for n in config.n:
        for r in config.r:
            require(r > -n, f"moment order must satisfy r > -n, got r={r}, n={n}")


def _run_moments(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    unstable = False
    for n in config.n:
        for p in config.p:
            _, profile = mc.estimate_norm_moments(n, p, samples, config.seed, r_grid=config.r,
                                                  workers=config.workers, ci_z=config.ci_z)
            for row in profile.rows:
                est = row.estimate
                unstable = unstable or est.unstable
                rows.append(format_row([n, p, row.r, est.value, est.std_error, est.ci_low, est.ci_high,
                                        samples, est.unstable]))
    return rows, unstable


# pairmoments

def _check_pairmoments(config: ExperimentConfig, samples: int) -> None:
    require(samples >= mc.MIN_PAIR_SAMPLES,
            f"pairmoments requires N >= {mc.MIN_PAIR_SAMPLES}, got {samples}")
    for p in config.p:
        require(math.isfinite(p), "pairmoments requires finite p")
    for r in config.r:
        require(r >= 1, f"pairmoments requires r >= 1, got {r}")


def _exact_pair_moment(n: int, p: float, r: float) -> Optional[float]:
    if r == 2.0:
        return theory.pair_moment_second(n, p)
    if n == 1 and p * r <= PAIR_MOMENT_MAX_PR:
        return pair_moment_quadrature(p, r) ** (1.0 / r)
    return None


def _run_pairmoments(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    for n in config.n:
        for p in config.p:
            for r in config.r:
                est = mc.pair_power_moment_mc(n, p, r, samples, config.seed,
                                              workers=config.workers, ci_z=config.ci_z)
                envelope = theory.pair_moment_envelope(n, p, r)
                rows.append(format_row([
                    n, p, r, est.value, est.std_error, est.ci_low, est.ci_high, samples,
                    envelope, est.value / envelope, _exact_pair_moment(n, p, r),
                ]))
    return rows, False


# anticonc

def _check_anticonc(config: ExperimentConfig, samples: int) -> None:
    _check_dimensions(config, 2)
    for n in config.n:
        for p in config.p:
            require(math.isfinite(p) and p >= 12.0 * math.log(n),
                    f"anticonc requires p >= 12 log n = {12.0 * math.log(n):.4g}, got p={p} (n={n})")
        for i in config.i_list:
            require(i <= n, f"top-order index {i} exceeds n={n}")
    for eps in config.eps:
        require(0 < eps <= 1, f"anticonc requires 0 < eps <= 1, got {eps}")


def _run_anticonc(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    violated = False
    for n in config.n:
        holds, i_max, worst = theory.quantile_gap_check(theory.quantile_vector(n))
        for p in config.p:
            for eps in config.eps:
                report = mc.anticoncentration_experiment(n, p, eps, samples, config.seed,
                                                         orders=config.i_list, workers=config.workers,
                                                         ci_z=config.ci_z)
                prefix = [n, p, eps]
                rows.append(format_row(prefix + ["top_in_range", None, *_estimate_cells(report.prob_top_in_range),
                                                 theory.top_order_interval_probability(n)]))
                rows.append(format_row(prefix + ["q1", None, *_estimate_cells(report.prob_q1), None]))
                for order in report.top_order_tail:
                    rows.append(format_row(prefix + ["top_order", order.index, *_estimate_cells(order.estimate),
                                                     order.bound]))
                rows.append(format_row(prefix + ["q1_count", None, report.q1_count, None, None, None]))
                rows.append(format_row(prefix + ["pnorm_violations", None, report.pnorm_violations,
                                                 None, None, 0]))
                rows.append(format_row(prefix + ["distance_violations", None, report.distance_violations,
                                                 None, None, 0]))
                rows.append(format_row(prefix + ["levy_q", None, *_estimate_cells(report.levy_q), report.bound]))
                rows.append(format_row(prefix + ["quantile_gap_margin", i_max, worst, None, None, 0.0]))
                violated = violated or bool(report.pnorm_violations or report.distance_violations) or not holds
    return rows, violated


# section and critdim

def _options(config: ExperimentConfig) -> sections.SectionOptions:
    # Strict runs with the net solver count only certified successes.
    solver = SolverMethod(config.solver)
    return sections.default_options(solver, config.delta, config.restarts, config.tol,
                                    config.strict and solver == SolverMethod.NET)


def _check_sections(config: ExperimentConfig, samples: int) -> None:
    options = _options(config)
    for n in config.n:
        for k in config.k:
            for p in config.p:
                sections.check_section_feasible(n, k, p, options)
    for eps in config.eps:
        require(eps > 0, f"section experiments require eps > 0, got {eps}")


def _run_section(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    options = _options(config)
    rows = []
    unstable = False
    for n in config.n:
        for p in config.p:
            for k in config.k:
                sample = sections.sample_distortions(n, k, p, samples, config.seed, options, config.workers)
                unstable = unstable or not sample.all_converged
                for eps in config.eps:
                    est = sections.success_from_distortions(sample, eps, options.strict, config.ci_z)
                    rows.append(format_row([k, *_estimate_cells(est), samples, options.solver.value,
                                            options.tolerance, n, p, eps]))
    return rows, unstable


def _check_critdim(config: ExperimentConfig, samples: int) -> None:
    _check_sections(config, samples)
    ks = config.k
    require(all(a < b for a, b in zip(ks, ks[1:])), f"critdim requires an increasing k grid, got {ks}")


def _run_critdim(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    options = _options(config)
    rows = []
    unstable = False
    for n in config.n:
        for p in config.p:
            cells = [(k, sections.sample_distortions(n, k, p, samples, config.seed, options, config.workers))
                     for k in config.k]
            unstable = unstable or not all(sample.all_converged for _, sample in cells)
            for eps in config.eps:
                curve = sections.curve_from_samples(n, p, eps, cells, config.seed, options, config.ci_z)
                k_star = sections.critical_k(curve, config.target_prob)
                for row in curve.rows:
                    rows.append(format_row([eps, row.k, *_estimate_cells(row.success), samples, k_star, n, p]))
    return rows, unstable


# process

def _check_process(config: ExperimentConfig, samples: int) -> None:
    require(samples >= 2, f"process requires N >= 2, got {samples}")
    for n in config.n:
        for k in config.k:
            require(1 <= k <= n, f"process requires 1 <= k <= n, got n={n}, k={k}")
    for r in config.r:
        require(r >= 1, f"process requires r >= 1, got {r}")


def process_directions(seed: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """Two fixed random unit vectors in R^k keyed by the seed."""
    g = RngStream.for_task(seed, "process-directions", k).normal((2, k))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[0], g[1]


def _run_process(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    for n in config.n:
        for k in config.k:
            a, b = process_directions(config.seed, k)
            for p in config.p:
                for r in config.r:
                    check = sections.schechtman_process_check(n, k, p, a, b, r, samples, config.seed,
                                                              workers=config.workers, ci_z=config.ci_z)
                    rows.append(format_row([n, k, p, r, check.lhs.value, check.lhs.std_error,
                                            check.rhs, check.margin]))
    return rows, False


# theory-table

def _check_theory_table(config: ExperimentConfig, samples: int) -> None:
    _check_dimensions(config, 3)
    for eps in config.eps:
        require(0 < eps < 1, f"theory-table requires eps in (0, 1), got {eps}")


def _run_theory_table(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    constants = _constants(config)
    rows = []
    for p in config.p:
        for n in config.n:
            critical = theory.critical_dimension(n, p, constants)
            variance = theory.variance_prediction(n, p, constants)
            mean = theory.mean_lp_prediction(n, p, constants)
            for eps in config.eps:
                beta = theory.beta_exponent(n, p, eps, constants)
                dvo = theory.dvoretzky_dimension(n, p, eps, constants)
                rows.append(format_row([
                    p, n, eps, beta.value, beta.regime, dvo.value, dvo.regime,
                    critical.value, variance.value, variance.regime, mean.value,
                ]))
    return rows, False


# superconc

def _check_superconc(config: ExperimentConfig, samples: int) -> None:
    require(samples >= mc.MIN_MOMENT_SAMPLES,
            f"superconc requires N >= {mc.MIN_MOMENT_SAMPLES}, got {samples}")


def _run_superconc(config: ExperimentConfig, samples: int) -> Tuple[Rows, bool]:
    rows = []
    for n in config.n:
        for p in config.p:
            row = mc.superconcentration_profile(n, p, samples, config.seed, workers=config.workers,
                                                ci_z=config.ci_z)
            rows.append(format_row([n, p, row.variance.value, row.variance.std_error,
                                    row.poincare.value, row.lipschitz]))
    return rows, False


EXPERIMENTS: Dict[str, Experiment] = {
    ExperimentKind.VARIANCE.value: Experiment(
        header=("n", "p", "samples", "mean", "mean_se", "variance", "variance_se", "compensated",
                "delta_limit", "prediction"),
        default_samples=20_000, check=_check_variance, run=_run_variance),
    ExperimentKind.TAILS.value: Experiment(
        header=("eps", "prob", "ci_low", "ci_high", "hits", "samples", "n", "p", "envelope"),
        default_samples=100_000, check=_check_tails, run=_run_tails),
    ExperimentKind.MOMENTS.value: Experiment(
        header=("n", "p", "r", "value", "std_error", "ci_low", "ci_high", "samples", "unstable"),
        default_samples=20_000, check=_check_moments, run=_run_moments),
    ExperimentKind.PAIRMOMENTS.value: Experiment(
        header=("n", "p", "r", "value", "std_error", "ci_low", "ci_high", "samples", "envelope", "ratio",
                "exact"),
        default_samples=100_000, check=_check_pairmoments, run=_run_pairmoments),
    ExperimentKind.ANTICONC.value: Experiment(
        header=("n", "p", "eps", "quantity", "index", "value", "ci_low", "ci_high", "bound"),
        default_samples=20_000, check=_check_anticonc, run=_run_anticonc),
    ExperimentKind.SECTION.value: Experiment(
        header=("k", "success", "ci_low", "ci_high", "samples", "solver", "tol", "n", "p", "eps"),
        default_samples=500, check=_check_sections, run=_run_section),
    ExperimentKind.CRITDIM.value: Experiment(
        header=("eps", "k", "success", "ci_low", "ci_high", "samples", "k_star", "n", "p"),
        default_samples=200, check=_check_critdim, run=_run_critdim),
    ExperimentKind.PROCESS.value: Experiment(
        header=("n", "k", "p", "r", "lhs", "lhs_se", "rhs", "margin"),
        default_samples=20_000, check=_check_process, run=_run_process),
    ExperimentKind.THEORY_TABLE.value: Experiment(
        header=("p", "n", "eps", "beta", "beta_regime", "k_dvo", "k_regime", "critical_dimension",
                "variance", "variance_regime", "mean_scale"),
        default_samples=0, check=_check_theory_table, run=_run_theory_table),
    ExperimentKind.SUPERCONC.value: Experiment(
        header=("n", "p", "variance", "variance_se", "poincare", "lipschitz"),
        default_samples=20_000, check=_check_superconc, run=_run_superconc),
}


def get_experiment(kind) -> Experiment:
    """Registry entry for an experiment kind (enum member or its value)."""
    key = ExperimentKind(kind).value
    return EXPERIMENTS[key]


def sample_count(config: ExperimentConfig) -> int:
    """Configured sample count or the experiment's default."""
    return config.samples if config.samples is not None else get_experiment(config.experiment).default_samples


def validate_experiment(config: ExperimentConfig) -> None:
    """
    Check every grid cell against the preconditions of the operation it feeds.

    Raises:
        DomainError: Naming the violated precondition
    """
    experiment = get_experiment(config.experiment)
    experiment.check(config, sample_count(config))
    if config.fit is not None:
        header = set(experiment.header)
        for expr in config.fit:
            for name in _column_names(expr):
                if name not in header:
                    raise DomainError(f"fit expression {expr!r} names unknown column {name!r}")


def _column_names(expr: str) -> List[str]:
    names = []
    body = expr.strip()
    for wrapper in ("loglog(", "log("):
        if body.startswith(wrapper) and body.endswith(")"):
            body = body[len(wrapper):-1]
            break
    for token in body.split("*"):
        name = token.split("^")[0].strip()
        if name and not (name[0].isdigit() or name[0] == "."):
            names.append(name)
    return names


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Validate and run one experiment, then fit the requested exponent.

    Args:
        config: Experiment configuration

    Returns:
        ExperimentResult: Header, string rows, instability flag and fit

    Raises:
        DomainError: If a grid cell violates a precondition or the fit is degenerate
    """
    validate_experiment(config)
    experiment = get_experiment(config.experiment)
    samples = sample_count(config)
    started = time.perf_counter()
    logger.info(f"Running {config.experiment} experiment with N={samples}, seed={config.seed}, "
                f"workers={config.workers}")
    rows, unstable = experiment.run(config, samples)
    logger.info(f"Finished {config.experiment} experiment: {len(rows)} rows in "
                f"{time.perf_counter() - started:.2f}s")
    if unstable:
        logger.warning(f"{config.experiment} experiment raised an instability flag")

    fit = None
    if config.fit is not None:
        header = list(experiment.header)
        fit = fit_exponent(table_from_rows(header, rows), config.fit[0], config.fit[1])
        logger.info(f"Fit {fit.model}: slope={fit.slope:.6g}, r^2={fit.r_squared:.4f}")
    return ExperimentResult(
        experiment=config.experiment,
        header=list(experiment.header),
        rows=rows,
        unstable=unstable,
        fit=fit,
    )
