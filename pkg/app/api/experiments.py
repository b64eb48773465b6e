"""
Experiment API routes.

Runs an experiment in process and returns its table; nothing is written
to disk. Long experiments belong to the CLI.
"""

import logging

from fastapi import APIRouter, HTTPException, status

from app.core.exceptions import DomainError
from app.engine.experiments import EXPERIMENTS, run_experiment
from app.schemas.experiment import ExperimentConfig, ExperimentResult

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/experiments")
async def list_experiments():
    """
    List the experiment types with their CSV headers.

    Returns:
        dict: Experiment name -> header columns and default sample count
    """
    return {
        name: {"header": list(entry.header), "defaultSamples": entry.default_samples}
        for name, entry in EXPERIMENTS.items()
    }


@router.post("/experiments", response_model=ExperimentResult)
def create_experiment(config: ExperimentConfig):
    """
    Run an experiment and return its table.

    Args:
        config: Experiment configuration (camelCase or snake_case keys)

    Returns:
        ExperimentResult: Header, rows, instability flag and optional fit

    Raises:
        HTTPException: If a grid cell violates a precondition (400)
    """
    try:
        return run_experiment(config)
    except DomainError as e:
        logger.info(f"Rejected {config.experiment} experiment: {e}")
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(e))
