"""Pydantic schemas package."""

from app.schemas.base import base_response_config
from app.schemas.estimates import (
    AnticoncReport,
    Centering,
    CIMethod,
    EstimateWithCI,
    MomentProfile,
    MomentSummary,
    SuperconcentrationRow,
    TailCurve,
    TailSide,
    TailStatistic,
)
from app.schemas.experiment import ExperimentConfig, ExperimentKind, ExperimentResult, FitResult
from app.schemas.sections import DistortionReport, ProcessCheck, SolverMethod, SuccessCurve
from app.schemas.theory import QuantileSummary, TheoryConstants, TheoryPrediction

__all__ = [
    "base_response_config",
    "AnticoncReport",
    "Centering",
    "CIMethod",
    "EstimateWithCI",
    "MomentProfile",
    "MomentSummary",
    "SuperconcentrationRow",
    "TailCurve",
    "TailSide",
    "TailStatistic",
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentResult",
    "FitResult",
    "DistortionReport",
    "ProcessCheck",
    "SolverMethod",
    "SuccessCurve",
    "QuantileSummary",
    "TheoryConstants",
    "TheoryPrediction",
]
