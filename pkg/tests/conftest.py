"""Pytest configuration and shared fixtures."""

import os
from typing import Generator

import numpy as np
import pytest
from fastapi.testclient import TestClient

# Set test environment before importing app modules
os.environ.setdefault("LOG_LEVEL", "WARNING")
os.environ.setdefault("DEFAULT_WORKERS", "1")

from app.core.gauss import RngStream
from app.main import app

TEST_SEED = 20240917


@pytest.fixture
def seed() -> int:
    """Fixed seed shared by Monte Carlo tests."""
    return TEST_SEED


@pytest.fixture
def stream() -> RngStream:
    """A fresh random stream with a fixed key."""
    return RngStream(TEST_SEED, 7)


@pytest.fixture
def rng() -> np.random.Generator:
    """Independent numpy generator for building test inputs."""
    return np.random.default_rng(TEST_SEED)


@pytest.fixture(scope="module")
def client() -> Generator[TestClient, None, None]:
    """Create a test client for the lab service."""
    with TestClient(app) as test_client:
        yield test_client


def within_se(estimate, target: float, k: float = 4.0) -> bool:
    """Whether ``target`` lies within k standard errors of an EstimateWithCI."""
    return abs(estimate.value - target) <= k * estimate.std_error


def brute_force_levy(samples: np.ndarray, t: float) -> int:
    """Largest number of samples in a closed window of width 2t, by exhaustive search."""
    values = np.asarray(samples)
    return max(int(np.sum((values >= left) & (values <= left + 2.0 * t))) for left in values)
