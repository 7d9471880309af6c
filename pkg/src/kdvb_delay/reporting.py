"""Deterministic writers for series CSV and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import CSV_COLUMNS, SimulationRecord


def _fmt(v: float) -> str:
    # repr round-trips exactly and always uses '.' as decimal separator
    return repr(float(v))


def write_series_csv(record: SimulationRecord, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in record.rows():
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return path


def write_state_csv(field, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "u"))
        for x, u in zip(field.grid.nodes, field.values):
            w.writerow((_fmt(x), _fmt(u)))
    return path


def plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-ready values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    return obj


def write_json(data: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(plain(data), indent=2, sort_keys=True) + "\n")
    return path


def record_summary(record: SimulationRecord) -> dict:
    res = np.abs(record.identity_residual_series)
    return {
        "t_final": float(record.times[-1]),
        "n_records": int(len(record.times)),
        "E_initial": float(record.E_series[0]),
        "E_final": float(record.E_series[-1]),
        "calE_initial": float(record.calE_series[0]),
        "calE_final": float(record.calE_series[-1]),
        "max_abs_identity_residual": float(res.max()),
        "max_linf": float(record.linf_series.max()),
    }


def base_report(config_echo: dict, **sections) -> dict:
    out = {"version": __version__, "config": config_echo}
    out.update(sections)
    return out
