"""
Theory API routes.

This module exposes the closed-form predictions (regime formulas, critical
dimensions, variance orders) and the quantile vector used by the
anti-concentration experiment.
"""

import logging
from typing import Callable, Dict, Optional

from fastapi import APIRouter, HTTPException, Query, status

from app.core.exceptions import DomainError
from app.engine import theory
from app.schemas.theory import QuantileSummary, TheoryConstants, TheoryPrediction

logger = logging.getLogger(__name__)

router = APIRouter()


def _needs(name: str, value: Optional[float]) -> float:
    if value is None:
        raise DomainError(f"query parameter '{name}' is required for this quantity")
    return value


# quantity -> builder(n, p, eps, t, r, constants)
QUANTITIES: Dict[str, Callable[..., TheoryPrediction]] = {
    "mean": lambda n, p, eps, t, r, c: theory.mean_lp_prediction(n, p, c),
    "critical-dimension": lambda n, p, eps, t, r, c: theory.critical_dimension(n, p, c),
    "beta": lambda n, p, eps, t, r, c: theory.beta_exponent(n, p, _needs("eps", eps), c),
    "dvoretzky": lambda n, p, eps, t, r, c: theory.dvoretzky_dimension(n, p, _needs("eps", eps), c),
    "tau": lambda n, p, eps, t, r, c: theory.tau(n, p, _needs("t", t), c),
    "psi": lambda n, p, eps, t, r, c: theory.psi(n, p, _needs("r", r), c),
    "theta": lambda n, p, eps, t, r, c: theory.theta_exponent(n, p, _needs("eps", eps), c),
    "variance": lambda n, p, eps, t, r, c: theory.variance_prediction(n, p, c),
    "gumbel": lambda n, p, eps, t, r, c: theory.gumbel_variance_prediction(n, c),
}


@router.get("/theory/quantiles/{n}", response_model=QuantileSummary)
async def get_quantiles(n: int):
    """
    Summarise the quantile vector y_1..y_n, y_0 of |g| for dimension n.

    Args:
        n: Dimension

    Returns:
        QuantileSummary: y_1, y_0, y_n, the gap-lemma check and the exact
        probability that the largest coordinate lies in [y_1, y_0]

    Raises:
        HTTPException: If n < 1 (400)
    """
    try:
        q = theory.quantile_vector(n)
        holds, i_max, worst = theory.quantile_gap_check(q)
        return QuantileSummary(
            n=n,
            y1=q.level(1),
            y0=q.y0,
            y_last=q.level(n),
            gap_lemma_holds=holds,
            gap_lemma_checked_up_to=i_max,
            gap_lemma_worst_margin=worst,
            top_in_range_probability=theory.top_order_interval_probability(n),
        )
    except DomainError as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))


@router.get("/theory/{quantity}", response_model=TheoryPrediction)
async def get_prediction(
    quantity: str,
    n: int = Query(..., description="Dimension"),
    p: str = Query("2", description="Norm index, a number >= 1 or 'inf'"),
    eps: Optional[float] = Query(None, description="Relative deviation / distortion slack"),
    t: Optional[float] = Query(None, description="Deviation scale for tau"),
    r: Optional[float] = Query(None, description="Moment order for psi"),
    c0: Optional[float] = Query(None, gt=0, lt=1, description="Override of THEORY_C0"),
    big_c: Optional[float] = Query(None, alias="bigC", gt=0, description="Override of THEORY_BIG_C"),
    small_c: Optional[float] = Query(None, alias="smallC", gt=0, description="Override of THEORY_SMALL_C"),
):
    """
    Evaluate one closed-form prediction.

    Args:
        quantity: One of mean, critical-dimension, beta, dvoretzky, tau,
                  psi, theta, variance, gumbel

    Returns:
        TheoryPrediction: Value, regime and the constants used

    Raises:
        HTTPException: Unknown quantity (404) or violated precondition (400)
    """
    builder = QUANTITIES.get(quantity)
    if builder is None:
        raise HTTPException(
            status_code=status.HTTP_404_NOT_FOUND,
            detail=f"Unknown quantity '{quantity}'; expected one of {sorted(QUANTITIES)}"
        )
    try:
        constants = TheoryConstants.from_settings(c0=c0, big_c=big_c, small_c=small_c)
        return builder(n, p, eps, t, r, constants)
    except DomainError as e:
        logger.info(f"Rejected {quantity} request: {e}")
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
