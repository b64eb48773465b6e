"""
Command-line experiment driver.

    python -m app.cli tails --n 100 --p 1 1.5 2 --eps 0:0.5:11 --samples 100000
    python -m app.cli theory-table --n 1000 1000000 --p 3 4 inf --eps 0.1 0.2

Each run writes a CSV table (with '#' metadata lines) and a JSON sidecar
next to it. Both files are written to a temporary file in the target
directory and renamed into place, so an interrupted run leaves nothing
behind. The CSV depends only on the configuration, never on --workers.

Exit codes: 0 success, 2 invalid configuration, 3 instability flag raised
under --strict.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app import __version__
from app.config import settings
from app.core.exceptions import ConfigError, DomainError
from app.engine.experiments import run_experiment
from app.schemas.experiment import ExperimentConfig, ExperimentKind, ExperimentResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3

SOLVER_NAMES = {"net": "net", "opt": "optimizer", "optimizer": "optimizer"}
# Fields that may differ between runs with byte-identical tables.
RUN_ONLY_FIELDS = {"workers", "output_path"}


def parse_grid(tokens: Sequence[str]) -> List[float]:
    """
    Expand grid tokens: plain numbers, or ``start:stop:count`` for an
    evenly spaced range including both ends.

    Raises:
        ConfigError: On a malformed token
    """
    values: List[float] = []
    for token in tokens:
        parts = token.split(":")
        try:
            if len(parts) == 1:
                values.append(float(token))
            elif len(parts) == 3:
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
                if count < 1:
                    raise ConfigError(f"range {token!r} needs a positive count")
                values.extend(float(v) for v in np.linspace(start, stop, count))
            else:
                raise ConfigError(f"cannot parse grid token {token!r}; use a number or start:stop:count")
        except ValueError as exc:
            raise ConfigError(f"cannot parse grid token {token!r}") from exc
    return values


def parse_int_grid(tokens: Sequence[str]) -> List[int]:
    """Integer grid; range points are rounded and duplicates dropped in order."""
    out: List[int] = []
    for token in tokens:
        if ":" in token:
            items = [int(round(value)) for value in parse_grid([token])]
        else:
            try:
                items = [int(token)]
            except ValueError as exc:
                raise ConfigError(f"expected an integer, got {token!r}") from exc
        for item in items:
            if item not in out:
                out.append(item)
    return out


def build_parser() -> argparse.ArgumentParser:
    """Argument parser for the experiment driver."""
    parser = argparse.ArgumentParser(
        prog="lplab",
        description="Run a concentration / random-section experiment and write a CSV table",
    )
    parser.add_argument("experiment", choices=[kind.value for kind in ExperimentKind],
                        help="experiment type")
    parser.add_argument("--n", nargs="+", help="dimensions (list or start:stop:count)")
    parser.add_argument("--p", nargs="+", help="norm indices; 'inf' selects the maximum norm")
    parser.add_argument("--k", nargs="+", help="section dimensions")
    parser.add_argument("--eps", nargs="+", help="relative deviations (list or start:stop:count)")
    parser.add_argument("--r", nargs="+", help="moment orders")
    parser.add_argument("--samples", type=int, help="sample count N")
    parser.add_argument("--seed", type=int, help="experiment seed")
    parser.add_argument("--workers", type=int, help="worker processes (does not change results)")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--c0", type=float, help="threshold constant c0 in (0, 1)")
    parser.add_argument("--bigC", dest="big_c", type=float, help="absolute constant C")
    parser.add_argument("--smallC", dest="small_c", type=float, help="absolute constant c")
    parser.add_argument("--ci-z", dest="ci_z", type=float, help="normal quantile of confidence intervals")
    parser.add_argument("--solver", choices=sorted(SOLVER_NAMES), help="distortion solver")
    parser.add_argument("--delta", type=float, help="net radius for the net solver")
    parser.add_argument("--restarts", type=int, help="random restarts of the optimizer")
    parser.add_argument("--tol", type=float, help="optimizer relative-change tolerance")
    parser.add_argument("--strict", action="store_true",
                        help="exit with status 3 on instability; net-solver successes must be certified")
    parser.add_argument("--fit", nargs=2, metavar=("X", "Y"), help="fit column expression Y against X")
    parser.add_argument("--statistic", choices=["norm", "euclidean_ratio"], help="tail statistic")
    parser.add_argument("--side", choices=["two_sided", "lower", "upper"], help="tail side")
    parser.add_argument("--centering", choices=["empirical_mean", "theory_mean"], help="tail centre")
    parser.add_argument("--i-list", dest="i_list", nargs="+", help="top-order indices for anticonc")
    parser.add_argument("--target", dest="target_prob", type=float,
                        help="target success probability for critdim")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """
    Build and validate an ExperimentConfig from parsed arguments.

    Raises:
        ConfigError: If a value fails schema validation
    """
    values: Dict[str, object] = {"experiment": args.experiment}
    if args.n:
        values["n"] = parse_int_grid(args.n)
    if args.p:
        values["p"] = list(args.p)
    if args.k:
        values["k"] = parse_int_grid(args.k)
    if args.eps:
        values["eps"] = parse_grid(args.eps)
    if args.r:
        values["r"] = parse_grid(args.r)
    if args.i_list:
        values["i_list"] = parse_int_grid(args.i_list)
    if args.solver:
        values["solver"] = SOLVER_NAMES[args.solver]
    if args.fit:
        values["fit"] = tuple(args.fit)
    if args.out:
        values["output_path"] = args.out
    for name in ("samples", "seed", "workers", "c0", "big_c", "small_c", "ci_z", "delta", "restarts",
                 "tol", "statistic", "side", "centering", "target_prob"):
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    values["strict"] = bool(args.strict)
    try:
        return ExperimentConfig(**values)
    except ValidationError as exc:
        raise ConfigError(_describe_validation(exc)) from exc
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _describe_validation(exc: ValidationError) -> str:
    problems = []
    for error in exc.errors():
        field = ".".join(str(part) for part in error.get("loc", ()))
        problems.append(f"{field}: {error.get('msg')}")
    return "; ".join(problems)


def output_path(config: ExperimentConfig) -> Path:
    """Configured output path or OUTPUT_DIR/<experiment>.csv."""
    if config.output_path:
        return Path(config.output_path)
    return Path(settings.OUTPUT_DIR) / f"{config.experiment}.csv"


def provenance(config: ExperimentConfig) -> Dict[str, object]:
    """The configuration fields that determine the table."""
    return config.model_dump(mode="json", exclude=RUN_ONLY_FIELDS)


def render_csv(config: ExperimentConfig, result: ExperimentResult) -> str:
    """CSV text: '#' metadata lines, the header and the rows."""
    buffer = io.StringIO()
    buffer.write(f"# lplab {__version__}\n")
    buffer.write(f"# experiment: {config.experiment}\n")
    buffer.write(f"# config: {json.dumps(provenance(config), sort_keys=True)}\n")
    if result.fit is not None:
        fit = result.fit
        buffer.write(f"# fit: {fit.model}; slope={format(fit.slope, '.17g')}; "
                     f"intercept={format(fit.intercept, '.17g')}; r_squared={format(fit.r_squared, '.17g')}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.header)
    writer.writerows(result.rows)
    return buffer.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")


def run(config: ExperimentConfig) -> int:
    """
    Run one experiment and write its table and sidecar.

    Args:
        config: Validated configuration

    Returns:
        int: Exit status (0, 2 or 3)
    """
    started = time.perf_counter()
    try:
        result = run_experiment(config)
    except DomainError as exc:
        logger.error(f"Invalid configuration: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    wall_time = time.perf_counter() - started

    path = output_path(config)
    atomic_write(path, render_csv(config, result))
    sidecar = {
        "version": __version__,
        "config": config.model_dump(mode="json", by_alias=False),
        "wall_time_seconds": wall_time,
        "rows": len(result.rows),
        "unstable": result.unstable,
        "fit": None if result.fit is None else result.fit.model_dump(mode="json"),
    }
    atomic_write(sidecar_path(path), json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {path} and {sidecar_path(path)} ({wall_time:.2f}s)")

    if result.unstable and config.strict:
        logger.warning("Instability flag raised under --strict")
        return EXIT_UNSTABLE
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point: parse arguments, configure logging and run."""
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as exc:
        logger.error(f"Invalid configuration: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
