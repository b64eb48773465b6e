"""
Deterministic chunked execution.

Work is cut into chunks whose size depends only on the problem, never on
the worker count. Chunk results come back in chunk-index order whether they
ran inline or in a process pool, so merged statistics are identical for
any number of workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TypeVar

from app.config import settings
from app.core.exceptions import require

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Chunk:
    """
    A contiguous block of samples.

    Attributes:
        index: Position of the chunk in the plan (also keys its random stream)
        start: Index of the first sample
        rows: Number of samples in the chunk
    """

    index: int
    start: int
    rows: int


def chunk_rows(width: int) -> int:
    """Samples per chunk for samples made of ``width`` Gaussian variates."""
    rows = settings.CHUNK_ELEMENTS // max(int(width), 1)
    return max(settings.MIN_CHUNK_ROWS, min(settings.MAX_CHUNK_ROWS, rows))


def plan_chunks(total: int, width: int, rows: Optional[int] = None) -> List[Chunk]:
    """
    Split ``total`` samples into chunks.

    Args:
        total: Number of samples
        width: Gaussian variates per sample (sets the chunk size)
        rows: Explicit chunk size overriding the width-based rule

    Returns:
        List[Chunk]: Chunks covering [0, total) in order
    """
    require(total >= 0, f"sample count must be non-negative, got {total}")
    size = rows if rows is not None else chunk_rows(width)
    require(size >= 1, "chunk size must be positive")
    return [
        Chunk(index=i, start=start, rows=min(size, total - start))
        for i, start in enumerate(range(0, total, size))
    ]


def run_ordered(fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """
    Apply ``fn`` to every task and return results in task order.

    ``fn`` and the tasks must be picklable when ``workers`` > 1.

    Args:
        fn: Task function (module-level or a partial of one)
        tasks: Task descriptions
        workers: Process count; 1 runs inline

    Returns:
        List[R]: ``[fn(t) for t in tasks]``
    """
    require(workers >= 1, f"workers must be at least 1, got {workers}")
    if workers == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    pool_size = min(workers, len(tasks))
    logger.debug(f"Dispatching {len(tasks)} tasks to {pool_size} worker processes")
    with ProcessPoolExecutor(max_workers=pool_size) as executor:
        return list(executor.map(fn, tasks))
