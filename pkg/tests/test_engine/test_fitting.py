"""Tests for exponent fitting on result tables."""

import math

import numpy as np
import pytest

from app.core.exceptions import DomainError
from app.engine.fitting import evaluate_expression, fit_exponent, fit_line, table_from_rows


def power_table(exponent):
    return [{"n": float(n), "variance": float(n) ** exponent, "eps": 0.1} for n in (10, 100, 1000, 10000)]


class TestEvaluateExpression:
    """Tests for column expressions."""

    def test_product_of_powers(self):
        """eps^2*n multiplies powered columns."""
        values = evaluate_expression("eps^2*n", power_table(-0.5))
        np.testing.assert_allclose(values, [0.1, 1.0, 10.0, 100.0])

    def test_log_wrapper(self):
        """log(...) takes natural logarithms."""
        np.testing.assert_allclose(evaluate_expression("log(n)", power_table(1.0)),
                                   np.log([10.0, 100.0, 1000.0, 10000.0]))

    def test_loglog_needs_values_above_one(self):
        """loglog of a value at most 1 is rejected."""
        with pytest.raises(DomainError):
            evaluate_expression("loglog(eps)", power_table(1.0))

    def test_unknown_column(self):
        """Unknown names are reported."""
        with pytest.raises(DomainError, match="unknown column"):
            evaluate_expression("width", power_table(1.0))

    def test_log_of_non_positive(self):
        """log of zero is rejected."""
        with pytest.raises(DomainError):
            evaluate_expression("log(zero)", [{"zero": 0.0}])


class TestFitExponent:
    """Tests for fit_exponent and fit_line."""

    def test_recovers_power_law(self):
        """log(variance) against log(n) has slope -1/2 for variance = n^-1/2."""
        fit = fit_exponent(power_table(-0.5), "log(n)", "log(variance)")
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.model == "log(variance) ~ log(n)"
        assert fit.rows_used == 4

    def test_skips_empty_cells(self):
        """Rows with an empty cell are left out of the fit."""
        table = table_from_rows(["x", "y"], [["1", "2"], ["2", "4"], ["3", ""], ["4", "8"], ["5", "10"]])
        fit = fit_exponent(table, "x", "y")
        assert fit.rows_used == 4
        assert fit.slope == pytest.approx(2.0)

    def test_degenerate_design(self):
        """A constant regressor is an error."""
        with pytest.raises(DomainError, match="degenerate"):
            fit_line(np.ones(5), np.arange(5.0), "y ~ x")

    def test_too_few_rows(self):
        """At least three rows are needed."""
        with pytest.raises(DomainError):
            fit_line(np.arange(2.0), np.arange(2.0), "y ~ x")


class TestTableFromRows:
    """Tests for table_from_rows."""

    def test_non_numeric_cells_are_nan(self):
        """Text cells become NaN and numbers parse."""
        table = table_from_rows(["a", "b"], [["1.5", "true"]])
        assert table[0]["a"] == 1.5
        assert math.isnan(table[0]["b"])
