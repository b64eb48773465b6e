"""
Delta-nets on the unit sphere S^{k-1} by randomized greedy packing.

Candidates are drawn uniformly from the sphere and accepted in draw order
when they are at distance >= delta from every accepted point. A packing
that rejects ``max_rejections`` consecutive candidates is declared
maximal; a maximal delta-separated set is a delta-net.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np

from app.config import settings
from app.core.exceptions import BudgetExceededError, require
from app.core.gauss import RngStream, derive_stream_id

logger = logging.getLogger(__name__)

MAX_NET_DIMENSION = 4
_DOT_BLOCK = 1 << 22


@dataclass(frozen=True)
class SphereNet:
    """
    A delta-separated point set on S^{k-1}.

    Attributes:
        points: Array of shape (m, k) with unit rows
        delta: Separation radius
        candidates: Candidates drawn while building the set
    """

    points: np.ndarray
    delta: float
    candidates: int

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.points.shape[1])


def check_net_budget(k: int, delta: float) -> None:
    """
    Refuse enumerations larger than the configured budget.

    Raises:
        BudgetExceededError: If k > 4 or (3/delta)^k exceeds NET_ENUMERATION_BUDGET
    """
    require(0 < delta < 1, f"net radius must lie in (0, 1), got {delta}")
    require(k >= 1, f"net dimension must be at least 1, got {k}")
    if k > MAX_NET_DIMENSION:
        raise BudgetExceededError(
            f"net enumeration supports k <= {MAX_NET_DIMENSION}, got k={k}; use the optimizer solver")
    log_size = k * math.log(3.0 / delta)
    if log_size > math.log(settings.NET_ENUMERATION_BUDGET):
        raise BudgetExceededError(
            f"(3/delta)^k = {math.exp(log_size):.3g} exceeds the budget "
            f"{settings.NET_ENUMERATION_BUDGET:.3g}; use the optimizer solver or a larger delta")


def random_sphere_points(stream: RngStream, count: int, k: int) -> np.ndarray:
    """Uniform points on S^{k-1} as normalized Gaussian vectors."""
    g = stream.normal((count, k))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def greedy_packing(k: int, delta: float, stream: RngStream,
                   max_rejections: Optional[int] = None) -> SphereNet:
    """
    Build a maximal delta-separated subset of S^{k-1}.

    Args:
        k: Sphere dimension plus one
        delta: Separation radius in (0, 1)
        stream: Source of candidates
        max_rejections: Consecutive rejections that end the construction

    Returns:
        SphereNet: The accepted points in acceptance order
    """
    check_net_budget(k, delta)
    limit = settings.NET_MAX_REJECTIONS if max_rejections is None else max_rejections
    require(limit >= 1, "max_rejections must be at least 1")
    # |u - v| >= delta on the sphere iff <u, v> <= 1 - delta^2 / 2.
    max_dot = 1.0 - 0.5 * delta * delta
    accepted = np.empty((0, k))
    run = 0
    drawn = 0
    while run < limit:
        batch = max(64, min(4096, _DOT_BLOCK // max(accepted.shape[0], 1)))
        candidates = random_sphere_points(stream, batch, k)
        drawn += batch
        if accepted.shape[0]:
            free = np.max(candidates @ accepted.T, axis=1) <= max_dot
        else:
            free = np.ones(batch, dtype=bool)
        fresh: List[np.ndarray] = []
        position = 0
        for idx in np.flatnonzero(free):
            run += idx - position
            position = idx + 1
            if run >= limit:
                break
            point = candidates[idx]
            if fresh and np.max(np.asarray(fresh) @ point) > max_dot:
                run += 1
                if run >= limit:
                    break
                continue
            fresh.append(point)
            run = 0
        else:
            run += batch - position
        if fresh:
            accepted = np.vstack([accepted, np.asarray(fresh)])
    logger.debug(f"Packing k={k}, delta={delta}: {accepted.shape[0]} points from {drawn} candidates")
    return SphereNet(points=accepted, delta=delta, candidates=drawn)


@lru_cache(maxsize=32)
def _cached_packing(k: int, delta: float, seed: int, max_rejections: int) -> SphereNet:
    stream = RngStream(seed, derive_stream_id("sphere-net", k, delta))
    return greedy_packing(k, delta, stream, max_rejections)


def sphere_net(k: int, delta: float, seed: Optional[int] = None,
               max_rejections: Optional[int] = None) -> SphereNet:
    """
    Net for (k, delta) built from a seed-keyed stream and reused across calls.

    The net does not depend on the matrix being examined, so one packing
    serves every instance of an experiment.
    """
    return _cached_packing(
        int(k),
        float(delta),
        settings.DEFAULT_SEED if seed is None else int(seed),
        settings.NET_MAX_REJECTIONS if max_rejections is None else int(max_rejections),
    )


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest distance between two distinct rows (inf for fewer than two rows)."""
    m = points.shape[0]
    if m < 2:
        return math.inf
    best = math.inf
    for start in range(0, m, 128):
        block = points[start:start + 128]
        d2 = np.sum((block[:, None, :] - points[None, :, :]) ** 2, axis=2)
        rows = np.arange(block.shape[0])
        d2[rows, start + rows] = np.inf
        best = min(best, float(np.min(d2)))
    return math.sqrt(best)
