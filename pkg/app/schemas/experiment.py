"""Experiment configuration and result schemas."""

import math
from enum import Enum
from typing import List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_serializer, field_validator

from app.config import settings
from app.core.gauss import PExponent
from app.schemas.base import base_response_config
from app.schemas.estimates import Centering, TailSide, TailStatistic
from app.schemas.sections import SolverMethod


class ExperimentKind(str, Enum):
    """Experiment types understood by the driver."""
    VARIANCE = "variance"
    TAILS = "tails"
    MOMENTS = "moments"
    PAIRMOMENTS = "pairmoments"
    ANTICONC = "anticonc"
    SECTION = "section"
    CRITDIM = "critdim"
    PROCESS = "process"
    THEORY_TABLE = "theory-table"
    SUPERCONC = "superconc"


class FitResult(BaseModel):
    """Ordinary least squares fit y = slope * x + intercept on transformed columns."""
    slope: float
    intercept: float
    r_squared: float = Field(..., ge=0, le=1)
    model: str
    rows_used: int = Field(..., ge=0)

    model_config = base_response_config


class ExperimentConfig(BaseModel):
    """
    Everything that determines an experiment's output bytes.

    Grids (n, p, k, eps, r) are lists; every cell is validated against the
    preconditions of the operation it feeds before any sampling starts.
    ``workers`` and ``output_path`` never influence the results.
    """
    experiment: ExperimentKind
    n: List[int] = Field(default_factory=lambda: [100])
    p: List[float] = Field(default_factory=lambda: [2.0])
    k: List[int] = Field(default_factory=lambda: [2])
    eps: List[float] = Field(default_factory=lambda: [0.1])
    r: List[float] = Field(default_factory=lambda: [2.0])
    samples: Optional[int] = Field(None, ge=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    workers: int = Field(default_factory=lambda: settings.DEFAULT_WORKERS, ge=1)
    output_path: Optional[str] = None
    c0: Optional[float] = Field(None, gt=0, lt=1)
    big_c: Optional[float] = Field(None, gt=0)
    small_c: Optional[float] = Field(None, gt=0)
    ci_z: float = Field(default_factory=lambda: settings.CI_Z, gt=0)
    solver: SolverMethod = SolverMethod.OPTIMIZER
    delta: float = Field(0.05, gt=0, lt=1)
    restarts: int = Field(default_factory=lambda: settings.OPT_RESTARTS, ge=1)
    tol: float = Field(default_factory=lambda: settings.OPT_TOL, gt=0)
    strict: bool = False
    statistic: TailStatistic = TailStatistic.NORM
    side: TailSide = TailSide.TWO_SIDED
    centering: Centering = Centering.EMPIRICAL_MEAN
    i_list: List[int] = Field(default_factory=lambda: [3, 4, 5, 6, 7, 8])
    target_prob: float = Field(0.9, gt=0, lt=1)
    fit: Optional[Tuple[str, str]] = None

    model_config = base_response_config

    @field_validator("p", mode="before")
    @classmethod
    def parse_p(cls, v):
        """Accept numbers or 'inf', as a single value or a list."""
        values = v if isinstance(v, (list, tuple)) else [v]
        return [PExponent.parse(item).value for item in values]

    @field_validator("n", "k", "eps", "r", "i_list", mode="before")
    @classmethod
    def listify(cls, v):
        """Allow a scalar where a grid is expected."""
        if isinstance(v, (list, tuple)):
            return list(v)
        return [v]

    @field_validator("n", "k", "i_list")
    @classmethod
    def validate_positive(cls, v):
        """Dimensions and indices are positive and the grid is non-empty."""
        if not v:
            raise ValueError("grid must not be empty")
        if any(item < 1 for item in v):
            raise ValueError(f"values must be at least 1, got {v}")
        return v

    @field_validator("eps", "r")
    @classmethod
    def validate_finite(cls, v):
        """Real grids are non-empty and finite."""
        if not v:
            raise ValueError("grid must not be empty")
        if any(not math.isfinite(item) for item in v):
            raise ValueError(f"values must be finite, got {v}")
        return v

    @field_serializer("p")
    def serialize_p(self, p: List[float]) -> List[Union[str, float]]:
        """Write infinity as the string 'inf' so the config stays valid JSON."""
        return ["inf" if math.isinf(item) else item for item in p]


class ExperimentResult(BaseModel):
    """Table produced by an experiment plus the optional fit."""
    experiment: ExperimentKind
    header: List[str]
    rows: List[List[str]]
    unstable: bool = False
    fit: Optional[FitResult] = None

    model_config = base_response_config
