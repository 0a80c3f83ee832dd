"""CSV and JSON readers and writers shared by the command line tools.

Floats are written with ``repr``, the shortest text that parses back to
the same double, so files round-trip losslessly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidArgument

__all__ = ["read_vector", "write_vector", "write_table", "read_json", "write_json", "format_number", "dumps"]


def format_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isfinite(v) and v == int(v) and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def read_vector(path) -> np.ndarray:
    """Read a single-column CSV with header ``value``."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows or [c.strip().lower() for c in rows[0]] != ["value"]:
        raise InvalidArgument(f"{path}: expected a single-column CSV with header 'value'")
    try:
        values = [float(r[0]) for r in rows[1:]]
    except ValueError as exc:
        raise InvalidArgument(f"{path}: non-numeric entry ({exc})") from None
    if any(len(r) != 1 for r in rows[1:]):
        raise InvalidArgument(f"{path}: expected exactly one column")
    return np.asarray(values, dtype=float)


def write_vector(path, values) -> None:
    write_table(path, ["value"], [[v] for v in np.asarray(values).tolist()])


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_number(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
