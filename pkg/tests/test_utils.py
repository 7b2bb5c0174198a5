# ABOUTME: Tests for utility functions
# ABOUTME: Validates file helpers, argument parsing, cache location and thread defaults

import json
import os
import tempfile
from unittest.mock import patch

import pandas as pd
import pytest

from src.exceptions import InputError
from src.utils import (
    CACHE_DIR_ENV, default_thread_count, file_digest, parse_float_list, parse_index_range,
    read_json_file, read_yaml_file, resolve_cache_dir, write_csv, write_json_file, write_yaml_file,
)


class TestParsing:
    """Test CLI argument parsers"""

    def test_parse_index_range(self):
        """Test a..b ranges and single indices"""
        assert parse_index_range("1..100") == (1, 100)
        assert parse_index_range(" 5 .. 7 ") == (5, 7)
        assert parse_index_range("10") == (10, 10)

    def test_parse_index_range_invalid(self):
        """Test malformed and out-of-domain ranges"""
        with pytest.raises(InputError):
            parse_index_range("a..b")
        with pytest.raises(InputError):
            parse_index_range("0..5")
        with pytest.raises(InputError):
            parse_index_range("9..3")

    def test_parse_float_list(self):
        """Test comma separated floats"""
        assert parse_float_list("0.2,0.6565,0.1435") == [0.2, 0.6565, 0.1435]
        assert parse_float_list("1, 2,", expected=2) == [1.0, 2.0]
        with pytest.raises(InputError):
            parse_float_list("1,2", expected=3)
        with pytest.raises(InputError):
            parse_float_list("1,x")


class TestFiles:
    """Test file helpers"""

    def test_yaml_round_trip(self):
        """Test writing and reading YAML"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "g.yaml")
            assert write_yaml_file(path, {"bonds": [{"from": "a", "to": "b", "length": 1.0}]})
            assert read_yaml_file(path)["bonds"][0]["length"] == 1.0

    def test_missing_files(self):
        """Test missing inputs raise with the missing-file invariant"""
        with pytest.raises(InputError) as exc_info:
            read_yaml_file("/nonexistent/graph.yaml")
        assert exc_info.value.invariant == "missing file"
        with pytest.raises(InputError):
            read_json_file("/nonexistent/poly.json")

    def test_malformed_yaml(self):
        """Test YAML syntax errors are schema violations"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "bad.yaml")
            with open(path, "w") as f:
                f.write("bonds: [unclosed\n")
            with pytest.raises(InputError) as exc_info:
                read_yaml_file(path)
            assert exc_info.value.invariant == "schema violation in config"

    def test_json_is_stable(self):
        """Test JSON output is byte-identical for equal data"""
        with tempfile.TemporaryDirectory() as tmpdir:
            a = write_json_file(os.path.join(tmpdir, "a.json"), {"b": 1, "a": [1.5, 2]})
            b = write_json_file(os.path.join(tmpdir, "sub", "b.json"), {"a": [1.5, 2], "b": 1})
            assert file_digest(a) == file_digest(b)
            assert read_json_file(a) == {"a": [1.5, 2], "b": 1}

    def test_csv_full_precision(self):
        """Test floats survive CSV output at full precision"""
        value = 0.1 + 0.2
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_csv([{"n": 1, "k_n": value}], os.path.join(tmpdir, "out.csv"))
            frame = pd.read_csv(path)
            assert frame["k_n"][0] == value
            assert list(frame.columns) == ["n", "k_n"]

    def test_file_digest(self):
        """Test sha256 digest of file contents"""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "x.txt")
            with open(path, "wb") as f:
                f.write(b"abc")
            assert file_digest(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


class TestRuntime:
    """Test runtime defaults"""

    def test_cache_dir_environment_wins(self):
        """Test the environment variable overrides the configured directory"""
        with tempfile.TemporaryDirectory() as tmpdir:
            env_dir = os.path.join(tmpdir, "env")
            with patch.dict(os.environ, {CACHE_DIR_ENV: env_dir}):
                path = resolve_cache_dir(os.path.join(tmpdir, "configured"))
            assert str(path) == env_dir
            assert path.is_dir()

    def test_cache_dir_from_config(self):
        """Test the configured directory is used without the environment variable"""
        with tempfile.TemporaryDirectory() as tmpdir:
            configured = os.path.join(tmpdir, "configured")
            with patch.dict(os.environ, {}, clear=False):
                os.environ.pop(CACHE_DIR_ENV, None)
                assert str(resolve_cache_dir(configured)) == configured

    @patch('src.utils.psutil.cpu_count')
    def test_default_thread_count(self, mock_cpu_count):
        """Test explicit requests win and psutil supplies the default"""
        mock_cpu_count.return_value = 12
        assert default_thread_count() == 12
        assert default_thread_count(3) == 3
        mock_cpu_count.return_value = None
        assert default_thread_count() == 1
