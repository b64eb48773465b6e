"""Random section schemas."""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from app.schemas.base import base_response_config
from app.schemas.estimates import EstimateWithCI


class SolverMethod(str, Enum):
    """How the extremes of the distortion functional are computed."""
    NET = "net"
    OPTIMIZER = "optimizer"


class Bracket(BaseModel):
    """Closed interval certified to contain an extreme value."""
    lower: float
    upper: float

    model_config = base_response_config


class DistortionReport(BaseModel):
    """
    Max and min of R(theta) = ||G theta||_p / ||G theta||_2 over the sphere.

    With method=net the brackets are certified enclosures of the true
    extremes; with method=optimizer they are absent and ``converged``
    reports whether every restart met the tolerance.
    """
    max_ratio: float = Field(..., gt=0)
    min_ratio: float = Field(..., gt=0)
    distortion: float = Field(..., ge=1)
    method: SolverMethod
    max_bracket: Optional[Bracket] = None
    min_bracket: Optional[Bracket] = None
    tolerance: float
    restarts_used: int = Field(0, ge=0)
    converged: bool = True
    net_size: Optional[int] = None
    local_variation: Optional[float] = None
    bracket_note: Optional[str] = None

    model_config = base_response_config

    @property
    def certified_distortion_upper(self) -> Optional[float]:
        """Upper bound on the true distortion implied by the brackets."""
        if self.max_bracket is None or self.min_bracket is None or self.min_bracket.lower <= 0:
            return None
        return self.max_bracket.upper / self.min_bracket.lower


class SuccessRow(BaseModel):
    """Success probability of one section dimension."""
    k: int = Field(..., ge=1)
    success: EstimateWithCI

    model_config = base_response_config


class SuccessCurve(BaseModel):
    """Probability that a random k-dimensional section is (1+eps)-Euclidean."""
    n: int
    p: float
    eps: float
    samples: int
    seed: int
    solver: SolverMethod
    tolerance: float
    strict: bool = False
    rows: List[SuccessRow]

    model_config = base_response_config


class ProcessCheck(BaseModel):
    """Both sides of the matrix-process moment inequality."""
    lhs: EstimateWithCI
    rhs: float
    gradient_moment: EstimateWithCI
    margin: float

    model_config = base_response_config
