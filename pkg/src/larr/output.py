"""Deterministic result files: CSV tables, CSV matrices and JSON sidecars.

Data files carry only content-derived metadata (version, config hash,
units), so identical jobs produce byte-identical files. Wall time and the
timestamp go to the sidecar.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def _header(title: str, meta: dict, extra_lines=()) -> str:
    lines = [f"larr {title}"]
    lines += [f"{key}: {value}" for key, value in meta.items()]
    lines += list(extra_lines)
    return "\n".join(lines)


def write_table(path: Path, title: str, meta: dict, columns, units, data) -> Path:
    """Columns of floats with a '#' metadata block, a units legend and a column-name row."""
    data = np.asarray(data, dtype=float) + 0.0  # turns -0.0 into 0.0
    if data.ndim != 2 or data.shape[1] != len(columns) or len(units) != len(columns):
        raise ValueError("columns, units and data width disagree")
    legend = "units: " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units))
    header = _header(title, meta, [legend, ",".join(columns)])
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="# ")
    return path


def write_matrix(path: Path, title: str, meta: dict, row_grid, col_grid, values,
                 row_label: str, col_label: str, value_label: str) -> Path:
    """Row-major matrix; first row holds the column grid, first column the row grid."""
    values = np.asarray(values, dtype=float)
    row_grid = np.asarray(row_grid, dtype=float)
    col_grid = np.asarray(col_grid, dtype=float)
    if values.shape != (row_grid.size, col_grid.size):
        raise ValueError("matrix shape does not match its grids")
    body = np.empty((row_grid.size + 1, col_grid.size + 1))
    body[0, 0] = np.nan
    body[0, 1:] = col_grid
    body[1:, 0] = row_grid
    body[1:, 1:] = values
    body += 0.0
    layout = (f"layout: row 0 = {col_label}, column 0 = {row_label}, "
              f"entries = {value_label}, row-major, corner is nan")
    np.savetxt(path, body, fmt=FLOAT_FORMAT, delimiter=",", header=_header(title, meta, [layout]),
               comments="# ")
    return path


def read_matrix(path):
    """Inverse of :func:`write_matrix`: (row_grid, col_grid, values)."""
    body = np.loadtxt(path, delimiter=",", ndmin=2)
    return body[1:, 0], body[0, 1:], body[1:, 1:]


def write_sidecar(path: Path, payload: dict, wall_time: float) -> Path:
    record = dict(payload)
    record["wall_time_s"] = wall_time
    record["timestamp"] = datetime.now(timezone.utc).isoformat()
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
