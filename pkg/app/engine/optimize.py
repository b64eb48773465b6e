"""
Multi-start projected gradient on the unit sphere.

All starts advance together as rows of one array. Every iteration tries a
step of fixed length ``INITIAL_STEP`` along the projected gradient followed
by renormalization, and halves it until the objective improves. A row stops
when the objective's relative change falls below ``tol`` or when its step
underflows without improvement.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from app.core.exceptions import require

logger = logging.getLogger(__name__)

INITIAL_STEP = 1.0
MIN_STEP = 1e-14

# Objective over rows: returns (values, gradients) for an (m, k) array of unit rows.
BatchObjective = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass
class SphereOptimum:
    """
    Result of a multi-start run.

    Attributes:
        theta: Best unit vector found
        value: Objective at ``theta``
        values: Final objective of every start
        iterations: Iterations performed
        converged: Whether every start stopped before the iteration cap
    """

    theta: np.ndarray
    value: float
    values: np.ndarray
    iterations: int
    converged: bool


def _normalize(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def project_tangent(theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Remove the radial component of each gradient row."""
    return grad - np.sum(grad * theta, axis=1, keepdims=True) * theta


def sphere_optimize(objective: BatchObjective, starts: np.ndarray, maximize: bool,
                    max_iter: int, tol: float) -> SphereOptimum:
    """
    Optimize a smooth function on S^{k-1} from several starts.

    Args:
        objective: Batch objective returning values and Euclidean gradients
        starts: Array (m, k) of non-zero start vectors
        maximize: Ascent when true, descent otherwise
        max_iter: Iteration cap
        tol: Relative-change tolerance

    Returns:
        SphereOptimum: Best row over all starts
    """
    require(starts.ndim == 2 and starts.shape[0] >= 1, "need at least one start")
    require(max_iter >= 1, f"max_iter must be at least 1, got {max_iter}")
    sign = 1.0 if maximize else -1.0
    theta = _normalize(np.asarray(starts, dtype=np.float64))
    values, grads = objective(theta)
    active = np.ones(theta.shape[0], dtype=bool)
    iterations = 0
    while iterations < max_iter and np.any(active):
        iterations += 1
        idx = np.flatnonzero(active)
        direction = project_tangent(theta[idx], grads[idx])
        steps = np.full(idx.size, INITIAL_STEP)
        # Positions in ``idx`` still searching along their direction.
        pending = np.arange(idx.size)
        while pending.size:
            rows = idx[pending]
            trial = _normalize(theta[rows] + sign * steps[pending, None] * direction[pending])
            trial_values, trial_grads = objective(trial)
            improved = sign * (trial_values - values[rows]) > 0

            accepted = rows[improved]
            change = np.abs(trial_values[improved] - values[accepted])
            scale = np.maximum(1.0, np.abs(values[accepted]))
            theta[accepted] = trial[improved]
            values[accepted] = trial_values[improved]
            grads[accepted] = trial_grads[improved]
            active[accepted[change <= tol * scale]] = False

            pending = pending[~improved]
            steps[pending] *= 0.5
            exhausted = steps[pending] < MIN_STEP
            active[idx[pending[exhausted]]] = False
            pending = pending[~exhausted]

    converged = not bool(np.any(active))
    if not converged:
        logger.warning(f"Sphere optimizer hit the iteration cap ({max_iter}) with "
                       f"{int(np.sum(active))} of {theta.shape[0]} starts still moving")
    best = int(np.argmax(sign * values))
    return SphereOptimum(
        theta=theta[best].copy(),
        value=float(values[best]),
        values=values.copy(),
        iterations=iterations,
        converged=converged,
    )
