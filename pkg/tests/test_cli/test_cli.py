"""Tests for the command-line experiment driver."""

import csv
import json

import pytest

from app import __version__
from app.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_UNSTABLE,
    main,
    parse_grid,
    parse_int_grid,
    sidecar_path,
)
from app.config import settings
from app.core.exceptions import ConfigError


def read_table(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = [line for line in lines if line.startswith("#")]
    body = [line for line in lines if not line.startswith("#")]
    return meta, list(csv.reader(body))


class TestGridParsing:
    """Tests for grid tokens."""

    def test_plain_numbers(self):
        """Plain tokens parse as floats."""
        assert parse_grid(["0.1", "2", "inf"]) == [0.1, 2.0, float("inf")]

    def test_range(self):
        """start:stop:count expands to an evenly spaced grid with both ends."""
        values = parse_grid(["0:0.5:11"])
        assert len(values) == 11
        assert values[0] == 0.0 and values[-1] == 0.5

    def test_integer_range_is_rounded_and_deduplicated(self):
        """Integer ranges round their points and drop repeats."""
        assert parse_int_grid(["10:100:3"]) == [10, 55, 100]
        assert parse_int_grid(["1:2:5", "2"]) == [1, 2]

    @pytest.mark.parametrize("token", ["a", "1:2", "1:2:0", "1:2:x"])
    def test_bad_tokens(self, token):
        """Malformed tokens are configuration errors."""
        with pytest.raises(ConfigError):
            parse_grid([token])

    def test_bad_integer(self):
        """Non-integer tokens in an integer grid are rejected."""
        with pytest.raises(ConfigError):
            parse_int_grid(["2.5"])


class TestRun:
    """End-to-end runs writing tables and sidecars."""

    def test_theory_table(self, tmp_path):
        """A closed-form table is written with metadata lines and a sidecar."""
        out = tmp_path / "theory.csv"
        code = main(["theory-table", "--n", "1000000", "--p", "4", "--eps", "0.1", "0.2",
                     "--c0", "0.5", "--bigC", "1", "--out", str(out)])
        assert code == EXIT_OK
        meta, rows = read_table(out)
        assert meta[0] == f"# lplab {__version__}"
        assert meta[1] == "# experiment: theory-table"
        assert rows[0][:4] == ["p", "n", "eps", "beta"]
        assert float(rows[1][5]) == pytest.approx(39.0625)
        assert float(rows[2][5]) == pytest.approx(111.80339887498948)

        sidecar = json.loads(sidecar_path(out).read_text(encoding="utf-8"))
        assert sidecar["rows"] == 2
        assert sidecar["unstable"] is False
        assert sidecar["config"]["experiment"] == "theory-table"
        assert sidecar["wall_time_seconds"] >= 0

    def test_default_output_path(self, tmp_path, monkeypatch):
        """Without --out the table goes to OUTPUT_DIR/<experiment>.csv."""
        monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path / "results"))
        assert main(["theory-table", "--n", "100"]) == EXIT_OK
        assert (tmp_path / "results" / "theory-table.csv").exists()

    def test_byte_identical_across_workers(self, tmp_path, monkeypatch):
        """The table is byte-identical for 1, 2 and 8 workers."""
        monkeypatch.setattr(settings, "MAX_CHUNK_ROWS", 100)
        args = ["tails", "--n", "15", "--p", "1", "inf", "--eps", "0:0.3:4", "--samples", "1200", "--seed", "9"]
        tables = []
        for workers in (1, 2, 8):
            out = tmp_path / f"workers-{workers}.csv"
            assert main(args + ["--workers", str(workers), "--out", str(out)]) == EXIT_OK
            tables.append(out.read_bytes())
        assert tables[0] == tables[1] == tables[2]

    def test_no_temporary_files_left(self, tmp_path):
        """Only the table and its sidecar remain in the output directory."""
        out = tmp_path / "t.csv"
        assert main(["theory-table", "--n", "100", "--out", str(out)]) == EXIT_OK
        assert sorted(p.name for p in tmp_path.iterdir()) == ["t.csv", "t.csv.json"]

    def test_fit_line(self, tmp_path):
        """--fit adds a '# fit:' line and the fit to the sidecar."""
        out = tmp_path / "fit.csv"
        code = main(["theory-table", "--n", "100", "1000", "10000", "--p", "1.5", "--eps", "0.1",
                     "--fit", "log(n)", "log(k_dvo)", "--out", str(out)])
        assert code == EXIT_OK
        meta, _ = read_table(out)
        assert any(line.startswith("# fit: log(k_dvo) ~ log(n); slope=") for line in meta)
        sidecar = json.loads(sidecar_path(out).read_text(encoding="utf-8"))
        assert sidecar["fit"]["slope"] == pytest.approx(1.0, abs=1e-12)


class TestExitCodes:
    """Tests for configuration errors and strict mode."""

    def test_invalid_constant(self, tmp_path, capsys):
        """c0 outside (0, 1) exits with status 2 and writes nothing."""
        out = tmp_path / "bad.csv"
        assert main(["theory-table", "--c0", "2", "--out", str(out)]) == EXIT_CONFIG
        assert "error:" in capsys.readouterr().err
        assert not out.exists()

    def test_invalid_p(self, tmp_path):
        """p below 1 exits with status 2."""
        assert main(["variance", "--p", "0.5", "--out", str(tmp_path / "v.csv")]) == EXIT_CONFIG

    def test_precondition_violation(self, tmp_path):
        """A grid cell violating a precondition exits with status 2 before sampling."""
        out = tmp_path / "a.csv"
        assert main(["anticonc", "--n", "20", "--p", "5", "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()

    def test_bad_grid_token(self, tmp_path):
        """A malformed range exits with status 2."""
        assert main(["tails", "--eps", "0:1", "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG

    def test_unknown_experiment(self):
        """argparse rejects unknown experiment names."""
        with pytest.raises(SystemExit):
            main(["entropy"])

    def test_strict_instability(self, tmp_path):
        """An instability flag under --strict exits with status 3 after writing."""
        out = tmp_path / "m.csv"
        code = main(["moments", "--n", "8", "--p", "2", "--r", "-3", "2", "--samples", "500",
                     "--strict", "--out", str(out)])
        assert code == EXIT_UNSTABLE
        assert out.exists()

    def test_instability_without_strict(self, tmp_path):
        """Without --strict an instability flag still exits with status 0."""
        out = tmp_path / "m.csv"
        code = main(["moments", "--n", "8", "--p", "2", "--r", "-3", "--samples", "500", "--out", str(out)])
        assert code == EXIT_OK
        sidecar = json.loads(sidecar_path(out).read_text(encoding="utf-8"))
        assert sidecar["unstable"] is True
