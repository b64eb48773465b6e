"""
Exponent fitting on result tables.

Column expressions are small products of powers of columns, e.g. ``n``,
``eps^2*n`` or ``log(variance)``; ``log(...)`` and ``loglog(...)`` wrap a
whole product.
"""

import math
import re
from typing import Dict, List, Mapping, Sequence

import numpy as np

from app.core.exceptions import DomainError, require
from app.schemas.experiment import FitResult

_WRAPPED = re.compile(r"^\s*(log|loglog)\s*\((.*)\)\s*$")
_FACTOR = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*|[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*(?:\^\s*(-?[0-9.]+))?\s*$")

Table = Sequence[Mapping[str, float]]


def _factor_values(token: str, table: Table) -> np.ndarray:
    match = _FACTOR.match(token)
    if match is None:
        raise DomainError(f"cannot parse factor {token!r}")
    name, power = match.group(1), match.group(2)
    if name[0].isdigit() or name[0] == ".":
        base = np.full(len(table), float(name))
    else:
        try:
            base = np.array([float(row[name]) for row in table], dtype=np.float64)
        except KeyError as exc:
            raise DomainError(f"unknown column {name!r}") from exc
    return base ** float(power) if power is not None else base


def evaluate_expression(expr: str, table: Table) -> np.ndarray:
    """
    Evaluate a column expression on every row.

    Args:
        expr: ``product`` or ``log(product)`` or ``loglog(product)``
        table: Rows keyed by column name

    Returns:
        np.ndarray: One value per row

    Raises:
        DomainError: On unknown columns, bad syntax or non-positive log arguments
    """
    wrapper = None
    body = expr
    match = _WRAPPED.match(expr)
    if match is not None:
        wrapper, body = match.group(1), match.group(2)
    values = np.ones(len(table), dtype=np.float64)
    for token in body.split("*"):
        values = values * _factor_values(token, table)
    if wrapper is None:
        return values
    present = values[~np.isnan(values)]
    require(bool(np.all(present > 0)), f"log of a non-positive value in {expr!r}")
    values = np.log(values)
    if wrapper == "loglog":
        require(bool(np.all(present > 1)), f"loglog needs values above 1 in {expr!r}")
        values = np.log(values)
    return values


def fit_line(x: np.ndarray, y: np.ndarray, model: str) -> FitResult:
    """
    Ordinary least squares of y on x.

    Raises:
        DomainError: With fewer than 3 points or a constant x
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    require(x.size >= 3, f"fit needs at least 3 rows, got {x.size}")
    require(bool(np.all(np.isfinite(x)) and np.all(np.isfinite(y))), "fit needs finite coordinates")
    if float(np.ptp(x)) == 0.0:
        raise DomainError("degenerate design: x is constant")
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    ss_res = float(np.sum(residual * residual))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=min(1.0, max(0.0, r_squared)),
        model=model,
        rows_used=int(x.size),
    )


def fit_exponent(table: Table, x_expr: str, y_expr: str) -> FitResult:
    """
    Fit ``y_expr`` against ``x_expr`` over a result table.

    Args:
        table: Rows keyed by column name
        x_expr: Column expression for the regressor
        y_expr: Column expression for the response

    Returns:
        FitResult: Slope, intercept, r^2 and the model label "y ~ x"

    Rows with an empty cell in either expression are skipped.
    """
    require(len(table) >= 3, f"fit needs at least 3 rows, got {len(table)}")
    x = evaluate_expression(x_expr, table)
    y = evaluate_expression(y_expr, table)
    keep = ~(np.isnan(x) | np.isnan(y))
    return fit_line(x[keep], y[keep], f"{y_expr} ~ {x_expr}")


def table_from_rows(header: List[str], rows: List[List[str]]) -> List[Dict[str, float]]:
    """Numeric view of a result table; non-numeric cells become NaN."""
    table = []
    for row in rows:
        record = {}
        for name, cell in zip(header, row):
            try:
                record[name] = float(cell)
            except ValueError:
                record[name] = math.nan
        table.append(record)
    return table
