# ABOUTME: Utility functions for config files, CSV/JSON output, argument parsing and runtime defaults
# ABOUTME: Provides common functionality used across the spectral modules and the CLI

import hashlib
import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
import psutil
import yaml

from src.exceptions import InputError

logger = logging.getLogger(__name__)

CACHE_DIR_ENV = "QGSPECTRA_CACHE_DIR"
DEFAULT_CACHE_DIR = "~/.cache/qgspectra"

_RANGE_PATTERN = re.compile(r'^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$')


def ensure_directory(path: str) -> Path:
    """Ensure directory exists, create if necessary"""
    p = Path(path).expanduser()
    p.mkdir(parents=True, exist_ok=True)
    return p


def read_yaml_file(file_path: str) -> Dict:
    """Read and parse YAML file"""
    path = Path(file_path)
    if not path.is_file():
        raise InputError(f"missing file: {file_path}", invariant="missing file")
    try:
        with open(path, 'r') as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        logger.error(f"Failed to parse YAML file {file_path}: {e}")
        raise InputError(f"schema violation in config {file_path}: {e}", invariant="schema violation in config")


def write_yaml_file(file_path: str, data: Dict) -> bool:
    """Write data to YAML file"""
    try:
        with open(file_path, 'w') as f:
            yaml.dump(data, f, default_flow_style=False, sort_keys=False)
        return True
    except Exception as e:
        logger.error(f"Failed to write YAML file {file_path}: {e}")
        return False


def read_json_file(file_path: str) -> Dict:
    """Read and parse a JSON document"""
    path = Path(file_path)
    if not path.is_file():
        raise InputError(f"missing file: {file_path}", invariant="missing file")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"schema violation in {file_path}: {e}", invariant="schema violation in config")


def write_json_file(file_path: str, data: Any) -> str:
    """Write JSON with stable key order so reruns are byte-identical"""
    path = Path(file_path)
    if path.parent and not path.parent.exists():
        ensure_directory(str(path.parent))
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return str(path)


def write_csv(rows: Union[pd.DataFrame, Sequence[Dict[str, Any]]], file_path: str,
              columns: Optional[List[str]] = None) -> str:
    """Write tabular results with full float precision"""
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    path = Path(file_path)
    if path.parent and not path.parent.exists():
        ensure_directory(str(path.parent))
    frame.to_csv(path, index=False, float_format="%.17g")
    return str(path)


def file_digest(file_path: str) -> str:
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(file_path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def parse_index_range(text: str) -> Tuple[int, int]:
    """Parse an inclusive index range written 'a..b' (a single integer means a..a)"""
    match = _RANGE_PATTERN.match(text)
    if match:
        lo, hi = int(match.group(1)), int(match.group(2))
    else:
        try:
            lo = hi = int(text)
        except ValueError:
            raise InputError(f"index range must look like 'a..b', got {text!r}")
    if lo < 1 or hi < lo:
        raise InputError(f"index range needs 1 <= a <= b, got {lo}..{hi}", invariant="roots with k <= 0 excluded")
    return lo, hi


def parse_float_list(text: str, expected: Optional[int] = None) -> List[float]:
    """Parse comma separated floats such as '0.2,0.6565,0.1435'"""
    try:
        values = [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise InputError(f"expected comma separated numbers, got {text!r}")
    if expected is not None and len(values) != expected:
        raise InputError(f"expected {expected} values, got {len(values)} in {text!r}")
    return values


def resolve_cache_dir(configured: Optional[str] = None) -> Path:
    """Orbit cache directory: environment first, then config, then the default"""
    location = os.getenv(CACHE_DIR_ENV) or configured or DEFAULT_CACHE_DIR
    return ensure_directory(location)


def default_thread_count(requested: Optional[int] = None) -> int:
    """Worker count for parallel sweeps; defaults to the logical CPU count"""
    if requested:
        return max(1, int(requested))
    return psutil.cpu_count(logical=True) or 1
