"""
Application configuration settings.

This module handles environment variable loading and lab configuration
using Pydantic settings. Every absolute constant the theory leaves
unspecified lives here so experiments can override it.
"""

import json
import logging
from typing import List, Union

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """
    Lab settings loaded from environment variables.

    Attributes:
        ENVIRONMENT: Runtime environment (development, production)
        DEBUG: Debug mode flag (enables HTTP request logging in the service)
        LOG_LEVEL: Logging level name
        DEFAULT_SEED: Seed used when an experiment does not name one
        DEFAULT_WORKERS: Worker processes used when an experiment does not name a count
        CHUNK_ELEMENTS: Target number of Gaussian variates generated per chunk task
        MIN_CHUNK_ROWS: Lower bound on samples per chunk
        MAX_CHUNK_ROWS: Upper bound on samples per chunk
        CI_Z: Normal quantile used for confidence intervals
        THEORY_C0: Threshold constant in "p <= c0 log n"
        THEORY_BIG_C: Absolute constant C in the piecewise formulas
        THEORY_SMALL_C: Absolute constant c in the piecewise formulas
        STABILITY_GATE: Calibration constant of the moment-stability gate
        NET_MAX_REJECTIONS: Consecutive rejections after which a packing is declared maximal
        NET_ENUMERATION_BUDGET: Largest admissible (3/delta)^k for net enumeration
        OPT_RESTARTS: Default number of random restarts of the sphere optimizer
        OPT_MAX_ITER: Iteration cap of a single optimizer run
        OPT_TOL: Relative-change tolerance of the sphere optimizer
        INFINITY_SMOOTHING_P: Finite exponent standing in for p = infinity in gradients
        OUTPUT_DIR: Default directory for experiment outputs
        CORS_ORIGINS: Origins allowed to call the lab service
    """

    # Environment
    ENVIRONMENT: str = Field(
        default="development",
        description="Runtime environment"
    )
    DEBUG: bool = Field(
        default=False,
        description="Debug mode flag"
    )

    # Logging
    LOG_LEVEL: str = Field(
        default="INFO",
        description="Logging level"
    )

    # Sampling
    DEFAULT_SEED: int = Field(
        default=20160601,
        ge=0,
        description="Seed used when an experiment does not name one"
    )
    DEFAULT_WORKERS: int = Field(
        default=1,
        ge=1,
        description="Worker processes used when an experiment does not name a count"
    )
    CHUNK_ELEMENTS: int = Field(
        default=1 << 21,
        ge=1024,
        description="Target number of Gaussian variates per chunk task"
    )
    MIN_CHUNK_ROWS: int = Field(
        default=16,
        ge=1,
        description="Lower bound on samples per chunk"
    )
    MAX_CHUNK_ROWS: int = Field(
        default=65536,
        ge=1,
        description="Upper bound on samples per chunk"
    )
    CI_Z: float = Field(
        default=1.96,
        gt=0,
        description="Normal quantile used for confidence intervals"
    )

    # Theory constants (the theory asserts existence only)
    THEORY_C0: float = Field(
        default=0.5,
        description="Threshold constant in 'p <= c0 log n'"
    )
    THEORY_BIG_C: float = Field(
        default=1.0,
        gt=0,
        description="Absolute constant C"
    )
    THEORY_SMALL_C: float = Field(
        default=1.0,
        gt=0,
        description="Absolute constant c"
    )
    STABILITY_GATE: float = Field(
        default=10.0,
        gt=0,
        description="Calibration constant of the moment-stability gate"
    )

    # Sections
    NET_MAX_REJECTIONS: int = Field(
        default=10_000,
        ge=1,
        description="Consecutive rejections after which a packing is maximal"
    )
    NET_ENUMERATION_BUDGET: float = Field(
        default=1e8,
        gt=0,
        description="Largest admissible (3/delta)^k"
    )
    OPT_RESTARTS: int = Field(
        default=32,
        ge=1,
        description="Default number of random restarts"
    )
    OPT_MAX_ITER: int = Field(
        default=10_000,
        ge=1,
        description="Iteration cap of a single optimizer run"
    )
    OPT_TOL: float = Field(
        default=1e-10,
        gt=0,
        description="Relative-change tolerance of the optimizer"
    )
    INFINITY_SMOOTHING_P: float = Field(
        default=1024.0,
        gt=2,
        description="Finite exponent standing in for p = infinity in gradients"
    )

    # Output
    OUTPUT_DIR: str = Field(
        default="results",
        description="Default directory for experiment outputs"
    )

    # Service CORS - can be a JSON string or comma-separated string
    CORS_ORIGINS: Union[str, List[str]] = Field(
        default=["http://localhost:8888", "http://127.0.0.1:8888"],
        description="Origins allowed to call the lab service"
    )

    @field_validator("LOG_LEVEL", mode="after")
    @classmethod
    def validate_log_level(cls, v):
        """Normalise LOG_LEVEL to an upper-case logging level name."""
        level = v.strip().upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"LOG_LEVEL must be a logging level name, got {v!r}")
        return level

    @field_validator("THEORY_C0", mode="after")
    @classmethod
    def validate_c0(cls, v):
        """The threshold constant c0 must lie strictly between 0 and 1."""
        if not 0 < v < 1:
            raise ValueError("THEORY_C0 must lie in (0, 1)")
        return v

    @field_validator("CORS_ORIGINS", mode="before")
    @classmethod
    def parse_cors_origins(cls, v):
        """
        Parse CORS_ORIGINS from a list, a JSON array string or a
        comma-separated string.
        """
        if isinstance(v, list):
            return v
        if isinstance(v, str):
            try:
                parsed = json.loads(v)
                if isinstance(parsed, list):
                    return parsed
            except json.JSONDecodeError:
                pass
            return [origin.strip() for origin in v.split(",") if origin.strip()]
        return v

    class Config:
        """Pydantic configuration."""
        env_file = ".env"
        case_sensitive = True


# Create global settings instance
settings = Settings()
