"""CSV and JSON writers for every artifact the CLI emits.

Numbers in CSV files are written positionally with 12 significant digits so
that repeated runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """12-significant-digit positional decimal (``nan``/``inf`` spelled out)."""
    if isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def to_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj))
    return path


def write_trajectory(path, traj) -> Path:
    return write_csv(path, ("t", "theta", "p"), zip(traj.times, traj.theta, traj.p))


def write_separatrix(path, sep) -> Path:
    return write_csv(path, ("theta", "p"), zip(sep.theta, sep.p))


def write_gap(path, series) -> Path:
    return write_csv(path, ("t", "gap"), zip(series.times, series.gap))


def write_basin(path, grid) -> Path:
    """Matrix CSV: header row holds the p axis, each row starts with its theta."""
    header = ["theta\\p"] + [fmt(v) for v in grid.p]
    rows = ([th] + list(grid.cells[i]) for i, th in enumerate(grid.theta))
    return write_csv(path, header, rows)
