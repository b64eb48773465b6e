"""Monte Carlo estimate schemas."""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from app.schemas.base import base_response_config

# Slack allowed when checking ci_low <= value <= ci_high after rounding.
_CI_SLACK = 1e-12


class CIMethod(str, Enum):
    """Confidence interval construction."""
    NORMAL = "normal"
    WILSON = "wilson"


class Centering(str, Enum):
    """Where tail deviations are measured from."""
    EMPIRICAL_MEAN = "empirical_mean"
    THEORY_MEAN = "theory_mean"


class TailStatistic(str, Enum):
    """Statistic whose relative deviation is measured."""
    NORM = "norm"
    EUCLIDEAN_RATIO = "euclidean_ratio"


class TailSide(str, Enum):
    """Which deviations count as hits."""
    TWO_SIDED = "two_sided"
    LOWER = "lower"
    UPPER = "upper"


class EstimateWithCI(BaseModel):
    """
    Point estimate with standard error and confidence interval.

    ``upper_bound_only`` marks probabilities with zero hits, where only the
    interval's upper end is informative. ``unstable`` marks estimates whose
    sampling distribution is not trustworthy (e.g. very negative moments).
    """
    value: float
    std_error: float = Field(..., ge=0)
    ci_low: float
    ci_high: float
    sample_count: int = Field(..., ge=0)
    ci_method: CIMethod
    upper_bound_only: bool = False
    unstable: bool = False

    model_config = base_response_config

    @model_validator(mode="after")
    def validate_interval(self):
        """The interval must contain the point estimate."""
        scale = max(1.0, abs(self.value))
        if self.ci_low > self.value + _CI_SLACK * scale or self.value > self.ci_high + _CI_SLACK * scale:
            raise ValueError(
                f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.value}")
        return self


class MomentSummary(BaseModel):
    """Mean and variance of the sampled statistic."""
    mean: EstimateWithCI
    variance: EstimateWithCI
    standardized_moment4: Optional[float] = None

    model_config = base_response_config


class TailRow(BaseModel):
    """One epsilon of a tail curve."""
    eps: float = Field(..., ge=0)
    prob: EstimateWithCI
    hits: int = Field(..., ge=0)
    envelope: Optional[float] = None

    model_config = base_response_config


class TailCurve(BaseModel):
    """Empirical deviation probabilities over an epsilon grid."""
    n: int
    p: float
    samples: int
    seed: int
    centering: Centering
    statistic: TailStatistic = TailStatistic.NORM
    side: TailSide = TailSide.TWO_SIDED
    center: float
    rows: List[TailRow]
    fitted_slope: Optional[float] = None

    model_config = base_response_config


class MomentRow(BaseModel):
    """I_r estimate for one r."""
    r: float
    estimate: EstimateWithCI

    model_config = base_response_config


class MomentProfile(BaseModel):
    """I_r(gamma_n, B_p^n) over an r grid."""
    n: int
    p: float
    samples: int
    rows: List[MomentRow]

    model_config = base_response_config


class TopOrderRow(BaseModel):
    """P(x_i* >= y_{floor(i/e^2)}) with its exp(-i) bound."""
    index: int = Field(..., ge=1)
    estimate: EstimateWithCI
    bound: float

    model_config = base_response_config


class AnticoncReport(BaseModel):
    """Outcome of the anti-concentration experiment for large p."""
    n: int
    p: float
    eps: float
    samples: int
    prob_q1: EstimateWithCI
    prob_top_in_range: EstimateWithCI
    top_order_tail: List[TopOrderRow]
    q1_count: int = Field(..., ge=0)
    pnorm_violations: int = Field(..., ge=0)
    distance_violations: int = Field(..., ge=0)
    levy_q: EstimateWithCI
    bound: float

    model_config = base_response_config


class SuperconcentrationRow(BaseModel):
    """Variance of the norm next to its Poincare and Lipschitz upper bounds."""
    n: int
    p: float
    variance: EstimateWithCI
    poincare: EstimateWithCI
    lipschitz: float

    model_config = base_response_config
