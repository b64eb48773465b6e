"""Tests for the experiment registry."""

import math

import numpy as np
import pytest

from app.config import settings
from app.core.exceptions import BudgetExceededError, DomainError
from app.engine.experiments import (
    EXPERIMENTS,
    format_cell,
    get_experiment,
    process_directions,
    run_experiment,
    sample_count,
    validate_experiment,
)
from app.schemas.experiment import ExperimentConfig, ExperimentKind


def config(**values):
    return ExperimentConfig(**values)


class TestFormatCell:
    """Tests for CSV cell formatting."""

    def test_cells(self):
        """Missing, boolean, integer and float cells."""
        assert format_cell(None) == ""
        assert format_cell(True) == "true"
        assert format_cell(np.int64(7)) == "7"
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(math.inf) == "inf"

    def test_float_round_trip(self):
        """17 significant digits reproduce the double."""
        value = 1.0 / 3.0
        assert float(format_cell(value)) == value


class TestRegistry:
    """Tests for the registry entries."""

    def test_every_kind_registered(self):
        """Every experiment kind has an entry."""
        assert set(EXPERIMENTS) == {kind.value for kind in ExperimentKind}

    def test_headers(self):
        """Identifying columns are part of every section header."""
        assert get_experiment("section").header == (
            "k", "success", "ci_low", "ci_high", "samples", "solver", "tol", "n", "p", "eps")
        assert get_experiment(ExperimentKind.CRITDIM).header == (
            "eps", "k", "success", "ci_low", "ci_high", "samples", "k_star", "n", "p")
        assert get_experiment("anticonc").header == (
            "n", "p", "eps", "quantity", "index", "value", "ci_low", "ci_high", "bound")

    def test_default_samples(self):
        """An unset sample count falls back to the experiment default."""
        assert sample_count(config(experiment="tails")) == 100_000
        assert sample_count(config(experiment="tails", samples=50)) == 50

    def test_process_directions(self):
        """Directions are unit vectors fixed by the seed."""
        a, b = process_directions(3, 4)
        np.testing.assert_allclose([np.linalg.norm(a), np.linalg.norm(b)], 1.0)
        np.testing.assert_array_equal(process_directions(3, 4)[0], a)


class TestValidation:
    """Tests for validate_experiment."""

    def test_anticonc_needs_large_p(self):
        """p below 12 log n names the violated precondition."""
        with pytest.raises(DomainError, match="12 log n"):
            validate_experiment(config(experiment="anticonc", n=[20], p=[10]))

    def test_theory_centre_limited(self):
        """Closed-form centring with p = 3 is rejected before sampling."""
        with pytest.raises(DomainError, match="theory_mean"):
            validate_experiment(config(experiment="tails", p=[3], centering="theory_mean"))

    def test_net_budget(self):
        """Net enumeration in k = 5 is refused."""
        with pytest.raises(BudgetExceededError):
            validate_experiment(config(experiment="section", n=[20], k=[5], p=[3], solver="net"))

    def test_critdim_grid_must_increase(self):
        """The critdim k grid must increase."""
        with pytest.raises(DomainError, match="increasing"):
            validate_experiment(config(experiment="critdim", n=[20], k=[3, 2], p=[3]))

    def test_fit_column_must_exist(self):
        """Fit expressions may only name header columns."""
        with pytest.raises(DomainError, match="unknown column"):
            validate_experiment(config(experiment="theory-table", n=[100], fit=("log(n)", "log(width)")))

    def test_pairmoments_sample_floor(self):
        """pairmoments needs at least 10000 pairs."""
        with pytest.raises(DomainError):
            validate_experiment(config(experiment="pairmoments", samples=100))


class TestTheoryTable:
    """Tests for the closed-form table."""

    def test_spot_values(self):
        """p = 4, n = 10^6: beta(0.1) = 400, k(0.1) = 39.0625, k_{p,n} = 4000."""
        result = run_experiment(config(experiment="theory-table", n=[10 ** 6], p=[4], eps=[0.1],
                                       c0=0.5, big_c=1.0))
        row = dict(zip(result.header, result.rows[0]))
        assert float(row["beta"]) == pytest.approx(400.0)
        assert float(row["k_dvo"]) == pytest.approx(39.0625)
        assert float(row["critical_dimension"]) == pytest.approx(4000.0)
        assert row["beta_regime"] == "2 < p <= c0 log n"

    def test_row_order(self):
        """Rows run over p, then n, then eps."""
        result = run_experiment(config(experiment="theory-table", n=[100, 1000], p=[1.5, "inf"],
                                       eps=[0.1, 0.2]))
        keys = [(row[0], row[1], row[2]) for row in result.rows]
        assert len(keys) == 8
        assert keys[0] == ("1.5", "100", "0.10000000000000001")
        assert keys[-1][0] == "inf"

    def test_fit(self):
        """For p <= 2, k = eps^2 n gives slope 1 in log-log coordinates."""
        result = run_experiment(config(experiment="theory-table", n=[100, 1000, 10000], p=[1.5], eps=[0.1],
                                       fit=("log(n)", "log(k_dvo)")))
        assert result.fit.slope == pytest.approx(1.0, abs=1e-12)
        assert result.fit.rows_used == 3


class TestMonteCarloExperiments:
    """Small end-to-end runs of the sampling experiments."""

    def test_tails_independent_of_workers(self, monkeypatch):
        """The table is identical for one, two and eight workers."""
        monkeypatch.setattr(settings, "MAX_CHUNK_ROWS", 200)
        values = dict(experiment="tails", n=[20], p=[1, 3], eps=[0.0, 0.1], samples=2_000, seed=5)
        inline = run_experiment(config(workers=1, **values))
        for workers in (2, 8):
            assert run_experiment(config(workers=workers, **values)).rows == inline.rows
        assert inline.rows[0][1] == "1"

    def test_moments_flags_instability(self):
        """Very negative orders raise the instability flag."""
        result = run_experiment(config(experiment="moments", n=[8], p=[2], r=[-3, 2], samples=500))
        assert result.unstable
        assert [row[-1] for row in result.rows] == ["true", "false"]

    def test_moment_profiles_non_decreasing_in_r(self):
        """Every emitted profile is a set of power means of one sample, so it grows with r."""
        result = run_experiment(config(experiment="moments", n=[8, 40], p=[1, 3, "inf"],
                                       r=[-1.5, -0.5, 0.0, 1.0, 2.0, 4.0, 8.0], samples=2_000, seed=11))
        profiles = {}
        for row in result.rows:
            record = dict(zip(result.header, row))
            profiles.setdefault((record["n"], record["p"]), []).append(
                (float(record["r"]), float(record["value"])))
        assert len(profiles) == 6
        for cells in profiles.values():
            values = [value for _, value in sorted(cells)]
            assert all(a <= b * (1 + 1e-12) for a, b in zip(values, values[1:]))

    def test_anticonc_rows(self):
        """Every quantity is reported and no deterministic check fails."""
        result = run_experiment(config(experiment="anticonc", n=[20], p=[40], eps=[0.1], samples=2_000,
                                       i_list=[3, 4]))
        quantities = [row[3] for row in result.rows]
        assert quantities == ["top_in_range", "q1", "top_order", "top_order", "q1_count",
                              "pnorm_violations", "distance_violations", "levy_q", "quantile_gap_margin"]
        by_name = {row[3]: row for row in result.rows}
        assert by_name["pnorm_violations"][5] == "0"
        assert by_name["distance_violations"][5] == "0"

    def test_section_rows(self):
        """One row per (k, eps) with the solver recorded."""
        result = run_experiment(config(experiment="section", n=[20], k=[1, 2], p=[3], eps=[0.1, 0.5],
                                       samples=8, restarts=2))
        assert len(result.rows) == 4
        assert all(len(row) == len(result.header) for row in result.rows)
        assert {row[5] for row in result.rows} == {"optimizer"}
        # k = 1 always succeeds.
        assert result.rows[0][1] == "1"

    def test_critdim_rows(self):
        """Every row of a cell carries the same k_star."""
        result = run_experiment(config(experiment="critdim", n=[30], k=[1, 2], p=[2], eps=[0.1],
                                       samples=40, restarts=2))
        assert {row[6] for row in result.rows} == {"2"}

    def test_process_rows(self):
        """The process check reports lhs, rhs and their margin."""
        result = run_experiment(config(experiment="process", n=[20], k=[2], p=[4], r=[2], samples=500))
        row = dict(zip(result.header, result.rows[0]))
        assert float(row["margin"]) == pytest.approx(float(row["rhs"]) - float(row["lhs"]))
