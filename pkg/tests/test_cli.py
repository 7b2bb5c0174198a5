# ABOUTME: Tests for the qgspectra command-line front end
# ABOUTME: Validates subcommand outputs, run manifests and the mapping of errors to exit codes

import json
import math
from pathlib import Path
from unittest.mock import patch

import pandas as pd
import pytest

from src.cli import build_parser, dispatch, load_config
from src.exceptions import InputError

GRAPHS = Path(__file__).resolve().parent.parent / "graphs"
TWO_BOND = str(GRAPHS / "two_bond.yaml")
S0 = 0.3 + 0.7 / math.sqrt(2)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """Keep orbit catalogs out of the user cache"""
    monkeypatch.setenv("QGSPECTRA_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path / "cache"


class TestParser:
    """Test argument parsing"""

    def test_subcommands(self):
        """Test every subcommand parses with its required arguments"""
        parser = build_parser()
        args = parser.parse_args(["solve", "--graph", TWO_BOND, "--n", "1..3"])
        assert args.method == "bootstrap"
        args = parser.parse_args(["expand", "--graph", TWO_BOND, "--n", "4", "--formula", "energy"])
        assert args.lmax == 12

    def test_bad_argument_exit_code(self):
        """Test argparse failures return 2"""
        assert dispatch(["solve", "--graph", TWO_BOND]) == 2
        assert dispatch(["solve", "--graph", TWO_BOND, "--n", "1..3", "--method", "newton"]) == 2

    def test_missing_config(self, tmp_path):
        """Test an explicit config file must exist"""
        with pytest.raises(InputError):
            load_config(str(tmp_path / "absent.yaml"))
        assert dispatch(["classify", "--graph", TWO_BOND, "--config", str(tmp_path / "absent.yaml")]) == 2


class TestCommands:
    """Test subcommand output"""

    def test_solve_writes_csv_and_manifest(self, tmp_path):
        """Test solve output columns, values and provenance"""
        out = tmp_path / "roots.csv"
        assert dispatch(["solve", "--graph", TWO_BOND, "--n", "1..10", "--out", str(out)]) == 0

        frame = pd.read_csv(out)
        assert list(frame.columns) == ["n", "k_n", "E_n", "method", "level_m", "residual", "degenerate_flag"]
        assert frame["n"].tolist() == list(range(1, 11))
        assert S0 * frame["k_n"].iloc[9] == pytest.approx(31.24664, abs=1e-5)

        manifest = json.loads(Path(f"{out}.manifest.json").read_text())
        assert manifest["command"] == "solve"
        assert manifest["schema_version"] == 1
        assert TWO_BOND in manifest["inputs"]
        assert str(out) in manifest["outputs"]

    def test_classify_prints_json(self, capsys):
        """Test classify reports the regularity summary"""
        assert dispatch(["classify", "--graph", TWO_BOND]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["m"] == 0
        assert summary["S0"] == pytest.approx(S0)

    def test_dump_trigpoly_roundtrip(self, tmp_path):
        """Test a dumped reduced form solves to the same roots"""
        dumped = tmp_path / "p.json"
        from_graph = tmp_path / "graph.csv"
        from_poly = tmp_path / "poly.csv"
        assert dispatch(["solve", "--graph", TWO_BOND, "--n", "1..5", "--dump-trigpoly", str(dumped),
                         "--out", str(from_graph)]) == 0
        assert dispatch(["solve", "--trigpoly", str(dumped), "--n", "1..5", "--out", str(from_poly)]) == 0
        pd.testing.assert_series_equal(pd.read_csv(from_graph)["k_n"], pd.read_csv(from_poly)["k_n"])

    def test_lagrange(self, tmp_path):
        """Test two-bond roots from the command line"""
        out = tmp_path / "lagrange.csv"
        assert dispatch(["lagrange", "--s0", str(S0), "--s1", str(0.3 - 0.7 / math.sqrt(2)),
                         "--r", str((math.sqrt(2) - 1) / (math.sqrt(2) + 1)), "--n", "1..2",
                         "--order", "12", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert frame["x_n"].iloc[0] == pytest.approx(3.26507, abs=1e-5)
        assert frame["k_n"].iloc[0] == pytest.approx(3.26507 / S0, abs=1e-5)

    def test_orbits(self, tmp_path, isolated_cache):
        """Test orbit catalog columns and the cache file"""
        out = tmp_path / "orbits.csv"
        assert dispatch(["orbits", "--graph", TWO_BOND, "--lmax", "4", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["canonical_word", "l", "l_P", "nu", "Re(A)", "Im(A)", "L0"]
        assert len(frame) == 5
        assert "0-2-3-1" in frame["canonical_word"].tolist()
        assert (isolated_cache / "orbits.db").exists()

    def test_expand(self, tmp_path):
        """Test orbit expansion rows carry partial sums and errors"""
        out = tmp_path / "expand.csv"
        assert dispatch(["expand", "--graph", TWO_BOND, "--n", "10", "--lmax", "12", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert "partial_l12" in frame.columns
        assert frame["error"].iloc[0] < 0.1

    def test_stats(self, tmp_path, capsys):
        """Test spacings, histogram and the bound report"""
        out = tmp_path / "spacings.csv"
        assert dispatch(["stats", "--graph", TWO_BOND, "--roots", "200", "--out", str(out)]) == 0
        assert len(pd.read_csv(out)) == 199
        histogram = pd.read_csv(tmp_path / "spacings.histogram.csv")
        assert list(histogram.columns) == ["bin_lo", "bin_hi", "count", "density"]
        report = json.loads(capsys.readouterr().out)
        assert report["m"] == 0

    def test_sweep_includes_corner(self, tmp_path):
        """Test the sweep adds near-corner points and bounds every spacing"""
        out = tmp_path / "sweep.csv"
        assert dispatch(["sweep", "--actions", "0.2,0.6565,0.1435", "--step", "0.5", "--roots", "100",
                         "--corner-depth", "1", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert frame["r"].tolist() == pytest.approx([0.0, 0.5, 0.9, 1.0])
        assert frame["m"].iloc[-1] == 2
        assert (frame["s_max"] <= frame["d_max"]).all()


class TestErrors:
    """Test error mapping"""

    def test_missing_graph(self, tmp_path, capsys):
        """Test a missing input file returns 2 with the violated condition"""
        assert dispatch(["classify", "--graph", str(tmp_path / "nope.yaml")]) == 2
        assert "violated" in capsys.readouterr().err

    def test_missing_source(self):
        """Test commands needing a graph refuse to run without one"""
        assert dispatch(["solve", "--n", "1..3"]) == 2

    def test_invalid_range(self):
        """Test non-positive indices are refused"""
        assert dispatch(["solve", "--graph", TWO_BOND, "--n", "0..3"]) == 2

    def test_unexpected_failure(self, mocker):
        """Test other exceptions return 1"""
        mocker.patch('src.cli.compute_spectrum', side_effect=RuntimeError("boom"))
        assert dispatch(["solve", "--graph", TWO_BOND, "--n", "1..3"]) == 1

    def test_no_manifest_on_failure(self, tmp_path):
        """Test a failed run leaves no outputs behind"""
        out = tmp_path / "roots.csv"
        with patch('src.cli.compute_spectrum', side_effect=RuntimeError("boom")):
            assert dispatch(["solve", "--graph", TWO_BOND, "--n", "1..3", "--out", str(out)]) == 1
        assert not out.exists()
        assert not Path(f"{out}.manifest.json").exists()
