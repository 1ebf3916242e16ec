"""Small deterministic file helpers: CSV with comment metadata, JSON.

Output files are UTF-8 with LF line endings and repr-exact floats, so a
rerun with the same seed reproduces them byte for byte. Metadata (config
hash, params, seeds) rides in leading ``# key: value`` comment lines.
"""

from __future__ import annotations

import json
import os
from typing import Iterable

__all__ = [
    "format_value",
    "write_csv",
    "read_csv",
    "read_series_csv",
    "write_json",
    "read_json",
    "canonical_json",
]


def format_value(v) -> str:
    """Shortest round-trip text for a cell."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns: list, rows: Iterable, meta: dict | None = None) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {value}\n")
        fh.write(",".join(map(str, columns)) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def read_csv(path):
    """Returns (columns, rows-as-string-lists, meta dict)."""
    meta: dict = {}
    columns: list = []
    rows: list = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    meta[key.strip()] = value.strip()
                continue
            if not columns:
                columns = line.split(",")
            else:
                rows.append(line.split(","))
    return columns, rows, meta


def read_series_csv(path):
    """Single-column numeric CSV (header row optional) as a float array."""
    import numpy as np

    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            token = line.strip().split(",")[0]
            if not token or token.startswith("#"):
                continue
            try:
                values.append(float(token))
            except ValueError:
                continue  # header row
    if not values:
        raise ValueError(f"no numeric values found in {path}")
    return np.asarray(values, dtype=np.float64)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path, obj) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True))
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
