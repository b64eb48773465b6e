"""Closed-form prediction schemas."""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.config import settings
from app.schemas.base import base_response_config


class TheoryConstants(BaseModel):
    """Absolute constants of the piecewise formulas (the theory asserts existence only)."""
    c0: float = Field(..., gt=0, lt=1)
    big_c: float = Field(..., gt=0)
    small_c: float = Field(..., gt=0)

    model_config = ConfigDict(**base_response_config, frozen=True)

    @classmethod
    def from_settings(cls, c0: Optional[float] = None, big_c: Optional[float] = None,
                      small_c: Optional[float] = None) -> "TheoryConstants":
        """Defaults from settings, optionally overridden field by field."""
        return cls(
            c0=settings.THEORY_C0 if c0 is None else c0,
            big_c=settings.THEORY_BIG_C if big_c is None else big_c,
            small_c=settings.THEORY_SMALL_C if small_c is None else small_c,
        )


class TheoryPrediction(BaseModel):
    """A closed-form value with the branch of the piecewise formula that produced it."""
    quantity: str
    value: float
    regime: str
    constants_used: TheoryConstants
    lower_bound: Optional[float] = None

    model_config = base_response_config

    @field_validator("value")
    @classmethod
    def validate_value(cls, v):
        """Predictions are non-negative."""
        if not v >= 0:
            raise ValueError(f"prediction must be non-negative, got {v}")
        return v


class QuantileSummary(BaseModel):
    """Service view of a quantile vector."""
    n: int
    y1: float
    y0: float
    y_last: float
    gap_lemma_holds: bool
    gap_lemma_checked_up_to: int
    gap_lemma_worst_margin: Optional[float] = None
    top_in_range_probability: float

    model_config = base_response_config
